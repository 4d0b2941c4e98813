"""
Energetic Variational Inference engine

N particles in R^D are moved by an implicit-Euler (proximal) scheme on the
kernelized free energy

    F_h = (1/N) sum_i [ ln((1/N) sum_j K_h(x_i, x_j)) + V(x_i) ]

Each outer epoch minimizes
    J_m(x) = sum_i ||x_i - x_i^m||^2 / (2 * step_size * N) + F_h(x)
jointly over all N*D coordinates with a limited-memory BFGS solver. A single
particle reduces the scheme to the proximal point algorithm on V (EVI-MAP).
"""

import logging
import time
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import line_search
from scipy.special import logsumexp

from .exceptions import InvalidArgumentError, NumericalError
from .posterior import HyperPoint

logger = logging.getLogger(__name__)

ValueFn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]
ObjectiveFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]

BOUNDARY_FLOOR = 1e-4
FALLBACK_STEP = 1e-6
CURVATURE_EPS = 1e-10


@dataclass(frozen=True)
class EviConfig:
    """Outer/inner iteration limits and line-search constants."""

    max_outer: int = 500
    max_inner: int = 100
    tol: float = 1e-8
    lbfgs_history: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-8

    def __post_init__(self):
        for name in ("max_outer", "max_inner", "lbfgs_history"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not (self.tol > 0 and self.gtol > 0):
            raise InvalidArgumentError("tol and gtol must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise InvalidArgumentError(f"Need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")

    def with_overrides(self, **kwargs) -> "EviConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass(frozen=True)
class ParticleEnsemble:
    """N x D particle locations with KDE bandwidth h and proximal step size."""

    particles: np.ndarray
    h: float
    step_size: float
    epoch: int = 0

    def __post_init__(self):
        particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if particles.shape[0] < 1:
            raise InvalidArgumentError("An ensemble needs at least one particle")
        if not np.all(np.isfinite(particles)):
            raise InvalidArgumentError("Particle coordinates must be finite")
        if not self.h > 0:
            raise InvalidArgumentError(f"Bandwidth h must be positive, got {self.h}")
        if not self.step_size > 0:
            raise InvalidArgumentError(f"step_size must be positive, got {self.step_size}")
        object.__setattr__(self, "particles", particles)

    @property
    def N(self) -> int:
        return self.particles.shape[0]

    @property
    def D(self) -> int:
        return self.particles.shape[1]


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    status: str
    trace: List[float] = field(default_factory=list)


@dataclass
class EviResult:
    """
    Outcome of an EVI run

    energy_trace[0] is F_h at the initial ensemble; one entry is appended per
    completed epoch. path holds the particle matrix after every epoch when
    requested.
    """

    ensemble: ParticleEnsemble
    energy_trace: List[float]
    status: str
    epochs: int
    aborted: bool = False
    path: List[np.ndarray] = field(default_factory=list)


@dataclass
class MapResult:
    mode: Union[HyperPoint, np.ndarray]
    x: np.ndarray
    value_trace: List[float]
    status: str
    epochs: int
    aborted: bool = False
    path: List[np.ndarray] = field(default_factory=list)  # one D-vector per epoch


def kde_kernel(u: np.ndarray, v: np.ndarray, h: float) -> Tuple[float, np.ndarray]:
    """
    Isotropic Gaussian smoothing kernel

    Args:
        u: First point
        v: Second point
        h: Bandwidth (variance scale)

    Returns:
        (exp(-||u - v||^2 / (2h)), gradient w.r.t. u)
    """
    if not h > 0:
        raise InvalidArgumentError(f"Bandwidth h must be positive, got {h}")
    diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    value = float(np.exp(-diff @ diff / (2.0 * h)))
    return value, -diff / h * value


def _log_kernel(X: np.ndarray, h: float) -> np.ndarray:
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    return -sq / (2.0 * h)


def _energy_value(X: np.ndarray, h: float, values: np.ndarray) -> float:
    N = X.shape[0]
    log_density = logsumexp(_log_kernel(X, h), axis=1) - np.log(N)
    return float(np.mean(log_density + values))


def _energy_grad(X: np.ndarray, h: float, grads: np.ndarray) -> np.ndarray:
    N = X.shape[0]
    logK = _log_kernel(X, h)
    # W[i, j] = K(x_i, x_j) / sum_k K(x_i, x_k)
    W = np.exp(logK - logsumexp(logK, axis=1, keepdims=True))
    own = -(X - W @ X) / h
    others = -(W.sum(axis=0)[:, None] * X - W.T @ X) / h
    return (own + others + grads) / N


def _evaluate_values(X: np.ndarray, V: ValueFn) -> np.ndarray:
    values = np.array([V(x) for x in X], dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericalError("V is not finite at some particle", diagnostics={"values": values.tolist()})
    return values


def _evaluate_grads(X: np.ndarray, V_grad: GradFn) -> np.ndarray:
    grads = np.array([V_grad(x) for x in X], dtype=float).reshape(X.shape)
    if not np.all(np.isfinite(grads)):
        raise NumericalError("grad V is not finite at some particle")
    return grads


def free_energy(ensemble: ParticleEnsemble, V: ValueFn) -> float:
    """F_h of the ensemble."""
    X = ensemble.particles
    return _energy_value(X, ensemble.h, _evaluate_values(X, V))


def free_energy_grad(ensemble: ParticleEnsemble, V_grad: GradFn) -> np.ndarray:
    """Exact N x D gradient of F_h."""
    X = ensemble.particles
    return _energy_grad(X, ensemble.h, _evaluate_grads(X, V_grad))


def proximal_objective(
    candidate: np.ndarray,
    anchor: np.ndarray,
    step_size: float,
    V: ValueFn,
    h: float,
) -> float:
    """
    J_m(candidate) for the epoch anchored at `anchor`

    Args:
        candidate: N x D trial positions
        anchor: N x D positions at the start of the epoch
        step_size: Proximal step
        V: Potential
        h: KDE bandwidth

    Returns:
        Penalty plus free energy
    """
    candidate = np.atleast_2d(np.asarray(candidate, dtype=float))
    anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
    if candidate.shape != anchor.shape:
        raise InvalidArgumentError(f"Shape mismatch: {candidate.shape} vs {anchor.shape}")
    if not step_size > 0:
        raise InvalidArgumentError(f"step_size must be positive, got {step_size}")
    N = candidate.shape[0]
    penalty = np.sum((candidate - anchor) ** 2) / (2.0 * step_size * N)
    return float(penalty + _energy_value(candidate, h, _evaluate_values(candidate, V)))


class _Oracle:
    """Caches the last (f, g) so the line search can ask for them separately."""

    def __init__(self, fun: ObjectiveFn):
        self.fun = fun
        self._key: Optional[bytes] = None
        self._value: Tuple[float, np.ndarray] = (np.inf, None)

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        key = np.ascontiguousarray(x, dtype=float).tobytes()
        if key != self._key:
            try:
                f, g = self.fun(x)
                f = float(f)
                g = np.asarray(g, dtype=float)
            except NumericalError:
                f, g = np.inf, np.full(x.shape, np.nan)
            if not np.isfinite(f):
                f = np.inf
            self._key, self._value = key, (f, g)
        return self._value

    def f(self, x: np.ndarray) -> float:
        return self(x)[0]

    def g(self, x: np.ndarray) -> np.ndarray:
        return self(x)[1]


def _two_loop(g: np.ndarray, history: deque) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    s, y, _ = history[-1]
    r = (s @ y) / (y @ y) * q
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ r)
        r += s * (a - b)
    return -r


def lbfgs_minimize(fun: ObjectiveFn, x0: np.ndarray, config: EviConfig) -> LbfgsResult:
    """
    Limited-memory BFGS with a strong-Wolfe line search

    Args:
        fun: Callable returning (value, gradient)
        x0: Starting point
        config: Iteration limit, history size and Wolfe constants

    Returns:
        LbfgsResult holding the best iterate; its value never exceeds f(x0)

    Raises:
        NumericalError: objective not finite at x0, or a non-finite gradient
            at an accepted iterate (last good iterate attached)
    """
    oracle = _Oracle(fun)
    x = np.array(x0, dtype=float).ravel()
    f, g = oracle(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalError("Objective not finite at the starting point", diagnostics={"x0": x.tolist()})

    history: deque = deque(maxlen=config.lbfgs_history)
    trace = [f]
    fallback_used = False
    status = "max_iter"
    n_iter = 0

    while n_iter < config.max_inner:
        if np.max(np.abs(g)) < config.gtol:
            status = "converged"
            break

        if history:
            d = _two_loop(g, history)
        else:
            d = -g * min(1.0, 1.0 / np.sum(np.abs(g)))
        if g @ d >= 0:
            history.clear()
            d = -g * min(1.0, 1.0 / np.sum(np.abs(g)))

        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore", RuntimeWarning)
            alpha, _, _, f_new, _, _ = line_search(
                oracle.f, oracle.g, x, d, gfk=g, old_fval=f,
                c1=config.c1, c2=config.c2,
            )

        if alpha is None or f_new is None or not np.isfinite(f_new):
            x_try = x + FALLBACK_STEP * d
            f_try, g_try = oracle(x_try)
            if fallback_used or not f_try < f:
                status = "line_search_failed"
                break
            logger.warning("Line search failed at inner iteration %d; taking a small fallback step", n_iter)
            fallback_used = True
            x_new, f_new, g_new = x_try, f_try, g_try
            history.clear()
        else:
            x_new = x + alpha * d
            f_new, g_new = oracle(x_new)

        if not np.all(np.isfinite(g_new)):
            raise NumericalError(
                "Gradient is not finite at an accepted iterate",
                diagnostics={"iteration": n_iter, "value": f_new},
                last_good=x.copy(),
            )

        s, y = x_new - x, g_new - g
        sy = s @ y
        if sy > CURVATURE_EPS:
            history.append((s, y, 1.0 / sy))

        x, f, g = x_new, f_new, g_new
        trace.append(f)
        n_iter += 1

    return LbfgsResult(x=x, fun=f, grad=g, n_iter=n_iter, status=status, trace=trace)


def init_particles(
    N: int,
    D: int,
    box: Sequence[Sequence[float]],
    rng: np.random.Generator,
    h: float = 0.02,
    step_size: float = 1.0,
) -> ParticleEnsemble:
    """
    Uniform draws in a natural-scale box, stored as logs

    Args:
        N: Number of particles
        D: Coordinates per particle
        box: One [lo, hi] pair per coordinate, 0 <= lo <= hi
        rng: Random generator
        h: KDE bandwidth of the returned ensemble
        step_size: Proximal step of the returned ensemble

    Returns:
        ParticleEnsemble in log coordinates (values below 1e-4 are floored)
    """
    bounds = np.asarray(box, dtype=float)
    if N < 1 or bounds.shape != (D, 2):
        raise InvalidArgumentError(f"Need N >= 1 and a {D} x 2 box, got N={N}, box shape {bounds.shape}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo > hi) or np.any(lo < 0) or np.any(hi <= 0):
        raise InvalidArgumentError(f"Invalid initial box {bounds.tolist()}")
    draws = rng.uniform(lo, hi, size=(N, D))
    return ParticleEnsemble(particles=np.log(np.maximum(draws, BOUNDARY_FLOOR)), h=h, step_size=step_size)


def _implicit_euler(
    ensemble: ParticleEnsemble,
    V: ValueFn,
    V_grad: GradFn,
    config: EviConfig,
    keep_path: bool,
) -> EviResult:
    N, D = ensemble.N, ensemble.D
    h, step = ensemble.h, ensemble.step_size
    X = ensemble.particles.copy()
    energy = [_energy_value(X, h, _evaluate_values(X, V))]
    path: List[np.ndarray] = []
    status, aborted, epochs = "max_outer", False, 0
    started = time.perf_counter()

    for epoch in range(1, config.max_outer + 1):
        anchor = X

        def objective(flat: np.ndarray) -> Tuple[float, np.ndarray]:
            Y = flat.reshape(N, D)
            values = _evaluate_values(Y, V)
            grads = _evaluate_grads(Y, V_grad)
            delta = Y - anchor
            value = np.sum(delta ** 2) / (2.0 * step * N) + _energy_value(Y, h, values)
            grad = delta / (step * N) + _energy_grad(Y, h, grads)
            return value, grad.ravel()

        try:
            result = lbfgs_minimize(objective, anchor.ravel(), config)
        except NumericalError as e:
            logger.warning("Epoch %d aborted: %s", epoch, e)
            status, aborted = "aborted", True
            break

        X = result.x.reshape(N, D)
        penalty = np.sum((X - anchor) ** 2) / (2.0 * step * N)
        energy.append(result.fun - penalty)
        displacement = float(np.mean(np.linalg.norm(X - anchor, axis=1)))
        epochs = epoch
        if keep_path:
            path.append(X.copy())
        logger.debug("epoch %d F_h %.10g displacement %.3e inner %s", epoch, energy[-1], displacement, result.status)
        if displacement < config.tol:
            status = "converged"
            break

    logger.info(
        "EVI finished (%s) after %d epochs, N=%d, F_h=%.6g, %.2fs",
        status, epochs, N, energy[-1], time.perf_counter() - started,
    )
    final = replace(ensemble, particles=X, epoch=ensemble.epoch + epochs)
    return EviResult(ensemble=final, energy_trace=energy, status=status, epochs=epochs, aborted=aborted, path=path)


def evi_im(
    init: ParticleEnsemble,
    V: ValueFn,
    V_grad: GradFn,
    config: EviConfig = EviConfig(),
    keep_path: bool = False,
) -> EviResult:
    """
    Implicit-Euler EVI (EVI-post)

    Args:
        init: Starting ensemble (carries h and step_size)
        V: Potential, one particle at a time
        V_grad: Gradient of V
        config: Solver settings
        keep_path: Record the particle matrix after every epoch

    Returns:
        EviResult; on an inner numerical failure the last valid ensemble is
        returned with aborted=True
    """
    return _implicit_euler(init, V, V_grad, config, keep_path)


def evi_map(
    x0: Union[HyperPoint, np.ndarray],
    V: ValueFn,
    V_grad: GradFn,
    config: EviConfig = EviConfig(),
    step_size: float = 1.0,
    keep_path: bool = False,
) -> MapResult:
    """
    Proximal point iteration x^{m+1} = argmin ||x - x^m||^2 / (2 step_size) + V(x)

    Runs the single-particle implicit-Euler scheme, so its iterates coincide
    with evi_im on a one-particle ensemble.
    """
    as_point = isinstance(x0, HyperPoint)
    start = x0.to_vector() if as_point else np.atleast_1d(np.asarray(x0, dtype=float))
    ensemble = ParticleEnsemble(particles=start[None, :], h=1.0, step_size=step_size)
    result = _implicit_euler(ensemble, V, V_grad, config, keep_path)
    x = result.ensemble.particles[0]
    mode = HyperPoint.from_vector(x, x0.d, x0.log_tau2 is not None) if as_point else x
    return MapResult(
        mode=mode,
        x=x,
        value_trace=result.energy_trace,
        status=result.status,
        epochs=result.epochs,
        aborted=result.aborted,
        path=[X[0] for X in result.path],
    )
