"""
Benchmark response functions, dataset generation and the standardized RMSPE
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .designs import Design, scale_to_ranges
from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


def toy_fn(x):
    """x * sin(x) on [0, 10]."""
    x = np.asarray(x, dtype=float)
    return x * np.sin(x)


def otl_fn(x):
    """
    Output transformerless push-pull circuit midpoint voltage

    Args:
        x: (..., 6) array of (Rb1, Rb2, Rf, Rc1, Rc2, I)

    Returns:
        Vm for each row
    """
    x = np.asarray(x, dtype=float)
    rb1, rb2, rf, rc1, rc2, gain = np.moveaxis(x, -1, 0)
    vb1 = 12.0 * rb2 / (rb1 + rb2)
    beta_term = gain * (rc2 + 9.0)
    denom = beta_term + rf
    return (
        (vb1 + 0.74) * beta_term / denom
        + 11.35 * rf / denom
        + 0.74 * rf * beta_term / (denom * rc1)
    )


def borehole_fn(x):
    """
    Water flow through a borehole

    Args:
        x: (..., 8) array of (rw, r, Tu, Hu, Tl, Hl, L, Kw)

    Returns:
        Flow rate for each row
    """
    x = np.asarray(x, dtype=float)
    rw, r, tu, hu, tl, hl, length, kw = np.moveaxis(x, -1, 0)
    if np.any(r <= rw):
        raise InvalidArgumentError("borehole_fn needs r > rw")
    log_ratio = np.log(r / rw)
    return 2.0 * np.pi * tu * (hu - hl) / (
        log_ratio * (1.0 + 2.0 * length * tu / (log_ratio * rw ** 2 * kw) + tu / tl)
    )


@dataclass(frozen=True)
class BenchmarkSpec:
    """Response function with its physical input ranges and noise level."""

    name: str
    d: int
    ranges: Tuple[Tuple[float, float], ...]
    noise_sd: float
    fn: Callable[[np.ndarray], np.ndarray]
    input_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.ranges) != self.d:
            raise InvalidArgumentError(f"{self.name}: {len(self.ranges)} ranges for d={self.d}")
        if self.noise_sd < 0:
            raise InvalidArgumentError(f"{self.name}: noise_sd must be >= 0")

    def evaluate(self, physical: np.ndarray) -> np.ndarray:
        physical = np.atleast_2d(np.asarray(physical, dtype=float))
        bounds = np.asarray(self.ranges)
        slack = 1e-9 * (bounds[:, 1] - bounds[:, 0])
        if np.any(physical < bounds[:, 0] - slack) or np.any(physical > bounds[:, 1] + slack):
            logger.warning("%s evaluated outside its input ranges", self.name)
        if self.d == 1:
            return self.fn(physical[:, 0])
        return self.fn(physical)


TOY = BenchmarkSpec(
    name="toy",
    d=1,
    ranges=((0.0, 10.0),),
    noise_sd=0.5,
    fn=toy_fn,
    input_names=("x",),
)

OTL = BenchmarkSpec(
    name="otl",
    d=6,
    ranges=((50.0, 150.0), (25.0, 70.0), (0.5, 3.0), (1.2, 2.5), (0.25, 1.2), (50.0, 300.0)),
    noise_sd=0.02,
    fn=otl_fn,
    input_names=("Rb1", "Rb2", "Rf", "Rc1", "Rc2", "I"),
)

BOREHOLE = BenchmarkSpec(
    name="borehole",
    d=8,
    ranges=(
        (0.05, 0.15),
        (100.0, 50000.0),
        (63070.0, 115600.0),
        (990.0, 1110.0),
        (63.1, 116.0),
        (700.0, 820.0),
        (1120.0, 1680.0),
        (9855.0, 12045.0),
    ),
    noise_sd=0.02,
    fn=borehole_fn,
    input_names=("rw", "r", "Tu", "Hu", "Tl", "Hl", "L", "Kw"),
)

BENCHMARKS: Dict[str, BenchmarkSpec] = {spec.name: spec for spec in (TOY, OTL, BOREHOLE)}


def get_benchmark(name: str) -> BenchmarkSpec:
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise InvalidArgumentError(f"Unknown benchmark '{name}', expected one of {sorted(BENCHMARKS)}")


def make_dataset(
    spec: BenchmarkSpec,
    design: Design,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> Dataset:
    """
    Evaluate a benchmark on a design and add Gaussian noise

    Args:
        spec: Benchmark
        design: Unit-cube design of matching dimension
        rng: Random generator for the noise
        noiseless: Skip the noise draw

    Returns:
        Dataset with unit-cube X and responses on the original scale
    """
    if design.d != spec.d:
        raise InvalidArgumentError(f"Design dimension {design.d} does not match {spec.name} (d={spec.d})")
    y = spec.evaluate(scale_to_ranges(design, spec.ranges))
    if not noiseless and spec.noise_sd > 0:
        y = y + rng.normal(0.0, spec.noise_sd, size=y.shape)
    return Dataset(X=design.points, y=y)


def standardized_rmspe(pred: Sequence[float], truth: Sequence[float]) -> float:
    """
    Root mean square prediction error over the sample standard deviation of truth

    Args:
        pred: Predictions
        truth: Observed test responses (at least 2, not all equal)

    Returns:
        Standardized RMSPE
    """
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape or truth.size < 2:
        raise InvalidArgumentError(f"Need equal lengths >= 2, got {pred.size} and {truth.size}")
    sd = np.std(truth, ddof=1)
    if sd == 0:
        raise InvalidArgumentError("Test responses are constant; standardized RMSPE is undefined")
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / sd)


def summarize(values: Sequence[float]) -> Dict[str, Optional[float]]:
    """Box-plot summary (mean, quartiles, extremes) of the finite values."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    summary: Dict[str, Optional[float]] = {"count": int(finite.size), "failed": int(values.size - finite.size)}
    if finite.size == 0:
        summary.update(dict.fromkeys(("mean", "min", "q1", "median", "q3", "max")))
        return summary
    q1, median, q3 = np.percentile(finite, [25, 50, 75])
    summary.update(
        mean=float(finite.mean()),
        min=float(finite.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        max=float(finite.max()),
    )
    return summary
