"""
Training / test data container and its CSV form
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class Dataset:
    """Inputs X in [0, 1]^d (n x d) and responses y (n,)."""

    X: np.ndarray
    y: np.ndarray
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise InvalidArgumentError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(X=self.X[idx], y=self.y[idx], names=self.names)

    def column_names(self) -> Tuple[str, ...]:
        return self.names or tuple(f"x{j + 1}" for j in range(self.d))

    def to_csv(self, path: Path) -> None:
        """X columns in unit-cube scale, final column y, one header row."""
        header = ",".join(self.column_names() + ("y",))
        data = np.column_stack([self.X, self.y]) if self.n else np.empty((0, self.d + 1))
        np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header, comments="")

    def with_responses(self, y: np.ndarray) -> "Dataset":
        return Dataset(X=self.X, y=y, names=self.names)

    @classmethod
    def from_csv(cls, path: Path) -> "Dataset":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        with open(path) as f:
            header = f.readline().strip().split(",")
        if len(header) < 2 or header[-1] != "y":
            raise InvalidArgumentError(f"{path}: expected header 'x1,...,xd,y', got {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            data = np.empty((0, len(header)))
        return cls(X=data[:, :-1], y=data[:, -1], names=tuple(header[:-1]))


@dataclass(frozen=True)
class ResponseScale:
    """
    Affine map between observed responses and the fitted scale

    y_fit = (y - center) / scale. The beta prior, tau2 and every coefficient
    summary live on the fitted scale; predictions are mapped back.
    """

    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.center) and np.isfinite(self.scale) and self.scale > 0):
            raise InvalidArgumentError(f"Invalid response scale: center={self.center}, scale={self.scale}")

    @classmethod
    def from_responses(cls, y: np.ndarray) -> "ResponseScale":
        """Sample mean and standard deviation; a constant or single response keeps scale 1."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size == 0:
            return cls()
        center = float(np.mean(y))
        scale = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
        return cls(center=center, scale=scale if scale > 0 else 1.0)

    def apply(self, dataset: Dataset) -> Dataset:
        return dataset.with_responses((dataset.y - self.center) / self.scale)

    def restore(self, dataset: Dataset) -> Dataset:
        return dataset.with_responses(self.restore_mean(dataset.y))

    def restore_mean(self, mean: np.ndarray) -> np.ndarray:
        return self.center + self.scale * np.asarray(mean, dtype=float)

    def restore_variance(self, variance: np.ndarray) -> np.ndarray:
        return self.scale ** 2 * np.asarray(variance, dtype=float)
