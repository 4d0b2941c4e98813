"""
Space-filling designs
Latin hypercube designs in the unit cube, maximin refinement and scaling to
physical input ranges
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import qmc

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
MAX_SWEEPS = 2000


@dataclass(frozen=True)
class Design:
    """n x d design in [0, 1]^d together with the seed that produced it."""

    points: np.ndarray
    seed: int
    min_distance_trace: Tuple[float, ...] = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def min_distance(self) -> float:
        if self.n < 2:
            return 0.0
        return float(pdist(self.points).min())

    def to_csv(self, path: Path) -> None:
        """Write an x1,...,xd header and one row per point with full double precision."""
        header = ",".join(f"x{j + 1}" for j in range(self.d))
        np.savetxt(path, self.points, delimiter=",", fmt="%.17g", header=header, comments="")


def is_latin(points: np.ndarray) -> bool:
    """
    Audit the Latin property

    Args:
        points: n x d matrix in [0, 1]

    Returns:
        True when every column has exactly one point in each stratum
        [(k-1)/n, k/n)
    """
    n = points.shape[0]
    if np.any(points < 0.0) or np.any(points > 1.0):
        return False
    strata = np.minimum(np.floor(points * n).astype(int), n - 1)
    expected = np.arange(n)
    return all(
        np.array_equal(np.sort(strata[:, j]), expected)
        for j in range(points.shape[1])
    )


def random_lhs(n: int, d: int, seed: int) -> Design:
    """
    Random Latin hypercube design

    Args:
        n: Number of points
        d: Input dimension
        seed: RNG seed

    Returns:
        Design with uniform positions inside each stratum
    """
    if n < 1 or d < 1:
        raise InvalidArgumentError(f"random_lhs needs n >= 1 and d >= 1, got n={n}, d={d}")
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    return Design(points=sampler.random(n), seed=seed)


def _closest_pair(dist2: np.ndarray) -> Tuple[int, int]:
    flat = int(np.argmin(dist2))
    return divmod(flat, dist2.shape[0])


def _best_swap_for_row(
    points: np.ndarray,
    dist2: np.ndarray,
    i: int,
) -> Tuple[float, int, int]:
    """
    Scan every column swap between row i and another row

    Returns the best achievable minimum squared distance together with the
    (column, partner row) that attains it.
    """
    n, d = points.shape
    inf = np.inf

    # Minimum over the pairs that touch neither i nor the partner k.
    rest = dist2.copy()
    rest[i, :] = inf
    rest[:, i] = inf
    order = np.argsort(rest, axis=1)
    first = rest[np.arange(n), order[:, 0]]
    second = rest[np.arange(n), order[:, 1]] if n > 2 else np.full(n, inf)
    candidates = np.broadcast_to(first, (n, n)).copy()
    hits = order[:, 0][None, :] == np.arange(n)[:, None]
    candidates[hits] = np.broadcast_to(second, (n, n))[hits]
    candidates[np.arange(n), np.arange(n)] = inf
    candidates[:, i] = inf
    untouched = candidates.min(axis=1)

    best = (-inf, -1, -1)
    others = np.ones(n, dtype=bool)
    others[i] = False
    for c in range(d):
        col = points[:, c]
        own = (col[i] - col) ** 2
        sq = (col[:, None] - col[None, :]) ** 2
        new_i = dist2[i][None, :] - own[None, :] + sq
        new_k = dist2 - sq + own[None, :]
        mask = np.zeros((n, n), dtype=bool)
        mask[:, i] = True
        mask[np.arange(n), np.arange(n)] = True
        new_i = np.where(mask, inf, new_i)
        new_k = np.where(mask, inf, new_k)
        score = np.minimum.reduce([
            untouched,
            new_i.min(axis=1),
            new_k.min(axis=1),
            dist2[i],
        ])
        score[~others] = -inf
        k = int(np.argmax(score))
        if score[k] > best[0]:
            best = (float(score[k]), c, k)
    return best


def _hill_climb(points: np.ndarray) -> Tuple[np.ndarray, Tuple[float, ...]]:
    """Coordinate-swap hill climbing on the minimum pairwise distance."""
    points = points.copy()
    dist2 = squareform(pdist(points, "sqeuclidean"))
    np.fill_diagonal(dist2, np.inf)
    current = float(dist2.min())
    trace = [np.sqrt(current)]

    for _ in range(MAX_SWEEPS):
        a, b = _closest_pair(dist2)
        improved = False
        for row in (a, b):
            score, c, k = _best_swap_for_row(points, dist2, row)
            if k >= 0 and score > current * (1 + 1e-12):
                points[[row, k], c] = points[[k, row], c]
                dist2 = squareform(pdist(points, "sqeuclidean"))
                np.fill_diagonal(dist2, np.inf)
                current = float(dist2.min())
                trace.append(np.sqrt(current))
                improved = True
                break
        if not improved:
            break
    return points, tuple(trace)


def maximin_lhs(n: int, d: int, seed: int, restarts: int = DEFAULT_RESTARTS) -> Design:
    """
    Maximin Latin hypercube design

    Each restart draws a random LHS and climbs by swapping single coordinates
    between two rows (which keeps the Latin property) until no swap raises
    the minimum pairwise distance.

    Args:
        n: Number of points (at least 2)
        d: Input dimension
        seed: RNG seed; the same arguments give the same design
        restarts: Number of random starts

    Returns:
        The best design over all restarts
    """
    if n < 2:
        raise InvalidArgumentError(f"maximin_lhs needs n >= 2, got {n}")
    if d < 1 or restarts < 1:
        raise InvalidArgumentError(f"maximin_lhs needs d >= 1 and restarts >= 1, got d={d}, restarts={restarts}")

    rng = np.random.default_rng(seed)
    best_points, best_trace, best_score = None, (), -np.inf
    for _ in range(restarts):
        start = qmc.LatinHypercube(d=d, seed=rng).random(n)
        points, trace = _hill_climb(start)
        if trace[-1] > best_score:
            best_points, best_trace, best_score = points, trace, trace[-1]

    logger.debug("maximin_lhs n=%d d=%d min distance %.6g", n, d, best_score)
    return Design(points=best_points, seed=seed, min_distance_trace=best_trace)


def scale_to_ranges(design: Design, ranges: Sequence[Sequence[float]]) -> np.ndarray:
    """
    Map each column affinely from [0, 1] to its [lo, hi] range

    Args:
        design: Unit-cube design
        ranges: One (lo, hi) pair per dimension

    Returns:
        n x d matrix of physical inputs
    """
    bounds = np.asarray(ranges, dtype=float)
    if bounds.shape != (design.d, 2):
        raise InvalidArgumentError(
            f"Expected {design.d} ranges, got array of shape {bounds.shape}"
        )
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo >= hi):
        raise InvalidArgumentError(f"Every range needs lo < hi, got {bounds.tolist()}")
    return lo + design.points * (hi - lo)
