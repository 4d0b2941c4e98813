"""
Polynomial mean-function basis g(x), design matrix G and the
effect-hierarchy prior correlation R
"""

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidArgumentError

Degree = Literal[0, 1, 2]


def term_label(exponents: Sequence[int]) -> str:
    """Readable name such as "1", "x1", "x1*x4" or "x2^2" (1-based)."""
    parts = []
    for j, e in enumerate(exponents):
        if e == 1:
            parts.append(f"x{j + 1}")
        elif e > 1:
            parts.append(f"x{j + 1}^{e}")
    return "*".join(parts) if parts else "1"


@dataclass(frozen=True)
class BasisSpec:
    """
    Ordered polynomial terms plus the mask of terms kept in the model

    terms[t][j] is the exponent of x_j in term t; term 0 is the intercept.
    """

    d: int
    degree: int
    terms: Tuple[Tuple[int, ...], ...]
    active_mask: Tuple[bool, ...]

    @property
    def active_terms(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(t for t, keep in zip(self.terms, self.active_mask) if keep)

    @property
    def p(self) -> int:
        """Number of active terms (columns of G)."""
        return sum(self.active_mask)

    @property
    def orders(self) -> np.ndarray:
        return np.array([sum(t) for t in self.active_terms], dtype=int)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(term_label(t) for t in self.active_terms)

    @property
    def all_labels(self) -> Tuple[str, ...]:
        return tuple(term_label(t) for t in self.terms)

    def with_mask(self, mask: Sequence[bool]) -> "BasisSpec":
        mask = tuple(bool(m) for m in mask)
        if len(mask) != len(self.terms):
            raise InvalidArgumentError(f"Mask length {len(mask)} != number of terms {len(self.terms)}")
        if not mask[0]:
            raise InvalidArgumentError("The intercept cannot be masked out")
        return replace(self, active_mask=mask)


@dataclass(frozen=True)
class HierarchyR:
    """Diagonal prior correlation with entry r**order for each term."""

    r: float
    diag: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


def build_basis(d: int, degree: int, active_mask: Optional[Sequence[bool]] = None) -> BasisSpec:
    """
    Canonical polynomial basis

    Ordering: intercept, linear terms by index, pure quadratics by index,
    then interactions x_i*x_j with i < j in lexicographic order.

    Args:
        d: Input dimension
        degree: 0 (constant), 1 (linear) or 2 (full quadratic)
        active_mask: Optional mask; all terms active by default

    Returns:
        BasisSpec
    """
    if degree not in (0, 1, 2):
        raise InvalidArgumentError(f"Unsupported basis degree: {degree}")
    if d < 1:
        raise InvalidArgumentError(f"Input dimension must be >= 1, got {d}")

    def unit(*idx):
        e = [0] * d
        for i in idx:
            e[i] += 1
        return tuple(e)

    terms = [unit()]
    if degree >= 1:
        terms += [unit(j) for j in range(d)]
    if degree == 2:
        terms += [unit(j, j) for j in range(d)]
        terms += [unit(i, j) for i, j in combinations(range(d), 2)]

    spec = BasisSpec(d=d, degree=degree, terms=tuple(terms), active_mask=(True,) * len(terms))
    return spec if active_mask is None else spec.with_mask(active_mask)


def eval_basis(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    """g(x) over the active terms."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise InvalidArgumentError(f"Expected a point of dimension {spec.d}, got shape {x.shape}")
    return design_matrix(spec, x[None, :])[0]


def design_matrix(spec: BasisSpec, X: np.ndarray) -> np.ndarray:
    """
    Matrix G whose row i is g(X[i])

    Args:
        spec: Basis specification
        X: n x d inputs (unit-cube scale)

    Returns:
        n x p matrix
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise InvalidArgumentError(f"Expected {spec.d} input columns, got {X.shape[1]}")
    exps = np.array(spec.active_terms, dtype=int)
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)


def hierarchy_R(spec: BasisSpec, r: float) -> HierarchyR:
    """
    Effect-hierarchy prior correlation R = diag{r**order(term)}

    Args:
        spec: Basis specification (masked terms are dropped)
        r: Decay in (0, 1)

    Returns:
        HierarchyR
    """
    if not 0.0 < r < 1.0:
        raise InvalidArgumentError(f"r must lie in (0, 1), got {r}")
    return HierarchyR(r=float(r), diag=float(r) ** spec.orders.astype(float))
