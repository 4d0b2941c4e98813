"""
Marginal posterior of the GP hyperparameters

Two prior regimes for the mean coefficients beta:
- informative: beta ~ MVN(0, nu^2 R); particles live in (log omega, log eta, log tau2)
- non-informative: p(beta) ∝ 1; tau2 is integrated out, particles live in
  (log omega, log eta)

V(x) = -log p(. | y) up to an additive constant, with the Jacobian of the
log transform included so that densities are with respect to log coordinates.
Every application of (K_n + eta I)^-1 goes through one Cholesky factor.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from .basis import BasisSpec, design_matrix
from .dataset import Dataset
from .exceptions import InvalidArgumentError, NumericalError
from .kernels import KernelParams, kernel_matrix, kernel_matrix_grads

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 1e-10
MAX_JITTER = 1e-6


@dataclass(frozen=True)
class Informative:
    """beta ~ MVN(0, nu2 * R) with R = diag(r**order)."""

    nu2: float
    r: float = 1.0 / 3.0

    def __post_init__(self):
        if not self.nu2 > 0:
            raise InvalidArgumentError(f"nu2 must be positive, got {self.nu2}")
        if not 0.0 < self.r < 1.0:
            raise InvalidArgumentError(f"r must lie in (0, 1), got {self.r}")


@dataclass(frozen=True)
class NonInformative:
    """Flat prior p(beta) ∝ 1."""


BetaPrior = Union[Informative, NonInformative]


@dataclass(frozen=True)
class PriorConfig:
    """
    Hyperpriors
    omega_i ~ Gamma(a_omega[i], b_omega[i]), eta ~ Gamma(a_eta, b_eta),
    tau2 ~ Inverse-chi2(df_tau2), beta per beta_prior.
    """

    a_omega: Union[float, Tuple[float, ...]] = 1.0
    b_omega: Union[float, Tuple[float, ...]] = 0.5
    a_eta: float = 1.0
    b_eta: float = 0.5
    df_tau2: float = 0.0
    beta_prior: BetaPrior = field(default_factory=NonInformative)
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        shapes = np.atleast_1d(np.asarray(self.a_omega, dtype=float))
        rates = np.atleast_1d(np.asarray(self.b_omega, dtype=float))
        if np.any(shapes <= 0) or np.any(rates <= 0) or self.a_eta <= 0 or self.b_eta <= 0:
            raise InvalidArgumentError("Gamma shapes and rates must be positive")
        if self.df_tau2 < 0:
            raise InvalidArgumentError(f"df_tau2 must be >= 0, got {self.df_tau2}")
        if self.jitter < 0:
            raise InvalidArgumentError(f"jitter must be >= 0, got {self.jitter}")

    @property
    def informative(self) -> bool:
        return isinstance(self.beta_prior, Informative)

    def omega_hyper(self, d: int) -> Tuple[np.ndarray, np.ndarray]:
        """Per-dimension (shape, rate) vectors broadcast to length d."""
        a = np.broadcast_to(np.asarray(self.a_omega, dtype=float), (d,)).copy()
        b = np.broadcast_to(np.asarray(self.b_omega, dtype=float), (d,)).copy()
        return a, b

    def point_dim(self, d: int) -> int:
        return d + 2 if self.informative else d + 1


@dataclass(frozen=True)
class HyperPoint:
    """(log omega, log eta[, log tau2])."""

    log_omega: np.ndarray
    log_eta: float
    log_tau2: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "log_omega", np.atleast_1d(np.asarray(self.log_omega, dtype=float)))
        coords = self.to_vector()
        if not np.all(np.isfinite(coords)):
            raise InvalidArgumentError(f"HyperPoint coordinates must be finite, got {coords}")

    @property
    def d(self) -> int:
        return self.log_omega.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return np.exp(self.log_omega)

    @property
    def eta(self) -> float:
        return float(np.exp(self.log_eta))

    @property
    def tau2(self) -> Optional[float]:
        return None if self.log_tau2 is None else float(np.exp(self.log_tau2))

    def to_vector(self) -> np.ndarray:
        tail = [self.log_eta] if self.log_tau2 is None else [self.log_eta, self.log_tau2]
        return np.concatenate([self.log_omega, tail])

    @classmethod
    def from_vector(cls, x: Sequence[float], d: int, informative: bool) -> "HyperPoint":
        x = np.asarray(x, dtype=float)
        expected = d + 2 if informative else d + 1
        if x.shape != (expected,):
            raise InvalidArgumentError(f"Expected a point of length {expected}, got shape {x.shape}")
        return cls(
            log_omega=x[:d],
            log_eta=float(x[d]),
            log_tau2=float(x[d + 1]) if informative else None,
        )


@dataclass(frozen=True)
class CovFactor:
    """Lower Cholesky factor of K_n + (eta + jitter) I."""

    L: np.ndarray
    jitter: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.L, True), b)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))


@dataclass(frozen=True)
class BetaConditional:
    beta_hat: np.ndarray
    sigma_beta: np.ndarray
    informative: bool


@dataclass(frozen=True)
class Tau2Conditional:
    """Scaled Inverse-chi2(df, scale)."""

    df: float
    scale: float


def _factorize(K: np.ndarray, eta: float, jitter: float) -> CovFactor:
    """Cholesky of K + (eta + jitter) I, escalating the jitter x10 up to MAX_JITTER."""
    n = K.shape[0]
    current = jitter
    while True:
        try:
            L = cholesky(K + (eta + current) * np.eye(n), lower=True)
            if current > jitter:
                logger.warning("Covariance factorized after raising jitter to %.1e", current)
            return CovFactor(L=L, jitter=current)
        except LinAlgError as e:
            if current >= MAX_JITTER:
                with np.errstate(all="ignore"):
                    cond = float(np.linalg.cond(K + eta * np.eye(n)))
                raise NumericalError(
                    f"Covariance factorization failed: {str(e)}",
                    diagnostics={"eta": eta, "jitter": current, "condition_number": cond, "n": n},
                ) from e
            current = min(max(current * 10.0, DEFAULT_JITTER), MAX_JITTER)


def _spd_factor(M: np.ndarray, what: str) -> np.ndarray:
    try:
        return cholesky(0.5 * (M + M.T), lower=True)
    except LinAlgError as e:
        raise NumericalError(
            f"{what} is not positive definite: {str(e)}",
            diagnostics={"size": M.shape[0]},
        ) from e


def cov_factor(dataset: Dataset, params: KernelParams, eta: float, jitter: float = DEFAULT_JITTER) -> CovFactor:
    """
    Factor K_n + eta I_n (+ jitter I_n)

    Args:
        dataset: Training data
        params: Kernel parameters
        eta: Nugget
        jitter: Starting diagonal stabilizer

    Returns:
        CovFactor with L L^T = K_n + (eta + jitter) I_n
    """
    if eta <= 0 and jitter <= 0:
        raise InvalidArgumentError("cov_factor needs eta > 0 or jitter > 0")
    return _factorize(kernel_matrix(dataset.X, params), eta, jitter)


def log_prior(prior: PriorConfig, point: HyperPoint) -> Tuple[float, np.ndarray]:
    """
    Log hyperprior density of (omega, eta) in log coordinates, Jacobian included

    Returns:
        (value, gradient w.r.t. (log omega, log eta)); the gradient is
        a - b * theta per coordinate.
    """
    a_w, b_w = prior.omega_hyper(point.d)
    omega, eta = point.omega, point.eta
    value = float(np.sum(a_w * point.log_omega - b_w * omega) + prior.a_eta * point.log_eta - prior.b_eta * eta)
    grad = np.concatenate([a_w - b_w * omega, [prior.a_eta - prior.b_eta * eta]])
    return value, grad


@dataclass
class _Terms:
    """Shared intermediate quantities for one hyperparameter point."""

    factor: CovFactor
    alpha: np.ndarray        # A^-1 y
    W: np.ndarray            # A^-1 G
    Q: np.ndarray            # G^T A^-1 G
    b: np.ndarray            # G^T A^-1 y
    c: float                 # y^T A^-1 y


def _terms(dataset: Dataset, G: np.ndarray, omega: np.ndarray, eta: float, jitter: float) -> _Terms:
    factor = _factorize(kernel_matrix(dataset.X, KernelParams(omega)), eta, jitter)
    alpha = factor.solve(dataset.y)
    W = factor.solve(G)
    Q = G.T @ W
    return _Terms(
        factor=factor,
        alpha=alpha,
        W=W,
        Q=0.5 * (Q + Q.T),
        b=G.T @ alpha,
        c=float(dataset.y @ alpha),
    )


def _check_point(dataset: Dataset, G: np.ndarray, prior: PriorConfig, point: HyperPoint) -> None:
    if point.d != dataset.d:
        raise InvalidArgumentError(f"Point has {point.d} lengthscales, data has dimension {dataset.d}")
    if prior.informative != (point.log_tau2 is not None):
        raise InvalidArgumentError("log_tau2 must be present exactly in the informative regime")
    if G.shape[0] != dataset.n:
        raise InvalidArgumentError(f"G has {G.shape[0]} rows, data has {dataset.n}")
    if not prior.informative and dataset.n <= G.shape[1]:
        raise InvalidArgumentError(
            f"Non-informative regime needs n > p, got n={dataset.n}, p={G.shape[1]}"
        )


def _prior_precision(prior: PriorConfig, p: int, orders: Optional[np.ndarray]) -> np.ndarray:
    beta_prior = prior.beta_prior
    if orders is None:
        orders = np.zeros(p)
    return 1.0 / (beta_prior.nu2 * beta_prior.r ** np.asarray(orders, dtype=float))


def _evaluate(
    dataset: Dataset,
    G: np.ndarray,
    prior: PriorConfig,
    point: HyperPoint,
    orders: Optional[np.ndarray],
    with_grad: bool,
) -> Tuple[float, Optional[np.ndarray]]:
    _check_point(dataset, G, prior, point)
    n, p = G.shape
    omega, eta = point.omega, point.eta
    t = _terms(dataset, G, omega, eta, prior.jitter)
    lp, lp_grad = log_prior(prior, point)

    if prior.informative:
        tau2 = point.tau2
        M = t.Q / tau2 + np.diag(_prior_precision(prior, p, orders))
        Lm = _spd_factor(M, "Posterior precision of beta")
        beta_hat = cho_solve((Lm, True), t.b) / tau2
        u = (t.c - t.b @ beta_hat) / tau2
        value = (
            np.sum(np.log(np.diag(Lm)))
            + 0.5 * u
            + 0.5 * (n + prior.df_tau2) * np.log(tau2)
            + 0.5 * t.factor.logdet()
            + 0.5 / tau2
            - lp
        )
    else:
        Lq = _spd_factor(t.Q, "G^T (K_n + eta I)^-1 G")
        beta_hat = cho_solve((Lq, True), t.b)
        s2 = t.c - t.b @ beta_hat
        m = prior.df_tau2 + n - p
        value = 0.5 * m * np.log1p(s2) + np.sum(np.log(np.diag(Lq))) + 0.5 * t.factor.logdet() - lp

    if not np.isfinite(value):
        raise NumericalError(
            "Log posterior is not finite",
            diagnostics={"point": point.to_vector().tolist()},
        )
    if not with_grad:
        return float(value), None

    # Derivatives along dA for A = K_n + eta I, expressed through
    # P-type trace terms and the generalized residual r = A^-1 (y - G beta_hat).
    resid = t.alpha - t.W @ beta_hat
    A_inv = t.factor.solve(np.eye(n))
    if prior.informative:
        sigma = cho_solve((Lm, True), np.eye(p))
        P = A_inv - t.W @ sigma @ t.W.T / tau2
        weight = 1.0 / tau2
    else:
        P = A_inv - t.W @ cho_solve((Lq, True), t.W.T)
        weight = m / (1.0 + s2)

    dK = kernel_matrix_grads(dataset.X, KernelParams(omega)) * omega[:, None, None]
    g_omega = 0.5 * np.einsum("ij,kij->k", P, dK) - 0.5 * weight * np.einsum("i,kij,j->k", resid, dK, resid)
    g_eta = 0.5 * eta * np.trace(P) - 0.5 * weight * eta * (resid @ resid)
    grad = np.concatenate([g_omega, [g_eta]]) - lp_grad

    if prior.informative:
        e = float((dataset.y - G @ beta_hat) @ resid)
        g_tau = (
            -0.5 * np.sum(sigma * t.Q) / tau2
            - 0.5 * e / tau2
            + 0.5 * (n + prior.df_tau2)
            - 0.5 / tau2
        )
        grad = np.append(grad, g_tau)

    if not np.all(np.isfinite(grad)):
        raise NumericalError(
            "Log posterior gradient is not finite",
            diagnostics={"point": point.to_vector().tolist()},
        )
    return float(value), grad


def log_posterior(
    dataset: Dataset,
    G: np.ndarray,
    prior: PriorConfig,
    point: HyperPoint,
    orders: Optional[np.ndarray] = None,
) -> float:
    """
    V = -log p(omega, eta[, tau2] | y) in log coordinates, up to a constant

    Args:
        dataset: Training data (unit-cube inputs)
        G: n x p design matrix of the mean basis
        prior: Prior configuration
        point: Hyperparameter point
        orders: Polynomial order of each column of G (drives R); intercept-only
            orders are assumed when omitted

    Returns:
        Scalar V value
    """
    return _evaluate(dataset, G, prior, point, orders, with_grad=False)[0]


def grad_log_posterior(
    dataset: Dataset,
    G: np.ndarray,
    prior: PriorConfig,
    point: HyperPoint,
    orders: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Analytic gradient of V w.r.t. (log omega, log eta[, log tau2])."""
    return _evaluate(dataset, G, prior, point, orders, with_grad=True)[1]


def beta_conditional(
    dataset: Dataset,
    G: np.ndarray,
    prior: PriorConfig,
    point: HyperPoint,
    orders: Optional[np.ndarray] = None,
    tau2: Optional[float] = None,
) -> BetaConditional:
    """
    Conditional posterior MVN(beta_hat, Sigma) of the mean coefficients

    Under the non-informative regime Sigma = tau2 * (G^T A^-1 G)^-1; tau2
    defaults to the plug-in value tau2_hat.
    """
    _check_point(dataset, G, prior, point)
    p = G.shape[1]
    t = _terms(dataset, G, point.omega, point.eta, prior.jitter)
    if prior.informative:
        tau2 = point.tau2
        M = t.Q / tau2 + np.diag(_prior_precision(prior, p, orders))
        Lm = _spd_factor(M, "Posterior precision of beta")
        sigma = cho_solve((Lm, True), np.eye(p))
        beta_hat = sigma @ t.b / tau2
    else:
        Lq = _spd_factor(t.Q, "G^T (K_n + eta I)^-1 G")
        beta_hat = cho_solve((Lq, True), t.b)
        if tau2 is None:
            s2 = t.c - t.b @ beta_hat
            tau2 = (1.0 + s2) / (prior.df_tau2 + dataset.n - p)
        sigma = tau2 * cho_solve((Lq, True), np.eye(p))
    return BetaConditional(beta_hat=beta_hat, sigma_beta=0.5 * (sigma + sigma.T), informative=prior.informative)


def tau2_conditional(dataset: Dataset, G: np.ndarray, prior: PriorConfig, point: HyperPoint) -> Tau2Conditional:
    """
    tau2 | omega, eta, y ~ Scaled Inverse-chi2(df_tau2 + n - p, tau2_hat)

    s2 is evaluated in its tau-free form y^T A^-1 [A - G Q^-1 G^T] A^-1 y.
    """
    if prior.informative:
        raise InvalidArgumentError("tau2_conditional applies to the non-informative beta regime")
    _check_point(dataset, G, prior, point)
    n, p = G.shape
    t = _terms(dataset, G, point.omega, point.eta, prior.jitter)
    Lq = _spd_factor(t.Q, "G^T (K_n + eta I)^-1 G")
    projected = G @ cho_solve((Lq, True), t.b)
    s2 = t.c - float(t.alpha @ projected)
    df = prior.df_tau2 + n - p
    return Tau2Conditional(df=df, scale=(1.0 + s2) / df)


def sample_beta(cond: BetaConditional, rng: np.random.Generator) -> np.ndarray:
    """One draw from MVN(beta_hat, Sigma) through the Cholesky factor of Sigma."""
    L = _spd_factor(cond.sigma_beta, "Sigma_beta")
    return cond.beta_hat + L @ rng.standard_normal(cond.beta_hat.shape[0])


def sample_tau2(cond: Tau2Conditional, rng: np.random.Generator) -> float:
    """One draw df * scale / chi2(df)."""
    return float(cond.df * cond.scale / rng.chisquare(cond.df))


class PosteriorTarget:
    """
    V and grad V as callables over flat log-coordinate vectors

    Value and gradient share one factorization; recent evaluations are cached
    so the EVI engine can ask for V and grad V separately.
    """

    def __init__(self, dataset: Dataset, basis: BasisSpec, prior: PriorConfig, G: Optional[np.ndarray] = None):
        self.dataset = dataset
        self.basis = basis
        self.prior = prior
        self.G = design_matrix(basis, dataset.X) if G is None else G
        self.orders = basis.orders
        if self.G.shape != (dataset.n, basis.p):
            raise InvalidArgumentError(f"G must be {dataset.n} x {basis.p}, got {self.G.shape}")
        self._cached = lru_cache(maxsize=1024)(self._evaluate_bytes)

    @property
    def dim(self) -> int:
        return self.prior.point_dim(self.dataset.d)

    def point(self, x: np.ndarray) -> HyperPoint:
        return HyperPoint.from_vector(x, self.dataset.d, self.prior.informative)

    def _evaluate_bytes(self, key: bytes) -> Tuple[float, np.ndarray]:
        x = np.frombuffer(key, dtype=float)
        return _evaluate(self.dataset, self.G, self.prior, self.point(x), self.orders, with_grad=True)

    def value_and_grad(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = self._cached(np.ascontiguousarray(x, dtype=float).tobytes())
        return value, grad.copy()

    def __call__(self, x: np.ndarray) -> float:
        return self.value_and_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[1]
