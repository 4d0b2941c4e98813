"""
Fitting, prediction and variable selection on top of the EVI engine
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .basis import BasisSpec, design_matrix
from .benchmarks import standardized_rmspe
from .dataset import Dataset, ResponseScale
from .evi import EviConfig, ParticleEnsemble, evi_im, evi_map, init_particles
from .exceptions import InvalidArgumentError, InvalidStateError, NumericalError
from .kernels import KernelParams, cross_kernel_matrix
from .posterior import (
    BetaConditional,
    HyperPoint,
    Informative,
    PriorConfig,
    PosteriorTarget,
    Tau2Conditional,
    beta_conditional,
    cov_factor,
    log_posterior,
    sample_beta,
    sample_tau2,
    tau2_conditional,
)

logger = logging.getLogger(__name__)

FitMethod = Literal["post", "map"]

DEFAULT_NU_GRID = tuple(round(0.05 * k, 2) for k in range(1, 101))
CV_MAX_OUTER = 100
INTERVAL_DRAWS = 100


@dataclass
class FitResult:
    """
    Fitted model state

    Holds the EVI-MAP mode and/or the EVI-post ensemble together with the
    conditional of beta (and tau2 under the flat beta prior) at every point.
    `dataset` carries the responses on the fitted scale; `response` maps
    predictions back to the observed scale.
    """

    prior: PriorConfig
    basis: BasisSpec
    dataset: Dataset
    G: np.ndarray
    mode: Optional[HyperPoint] = None
    ensemble: Optional[ParticleEnsemble] = None
    energy_trace: List[float] = field(default_factory=list)
    status: str = ""
    aborted: bool = False
    beta_conditionals: List[BetaConditional] = field(default_factory=list)
    tau2_conditionals: List[Tau2Conditional] = field(default_factory=list)
    response: ResponseScale = field(default_factory=ResponseScale)

    def __post_init__(self):
        if self.mode is None and self.ensemble is None:
            raise InvalidStateError("A fit needs a mode or a particle ensemble")

    @property
    def method(self) -> FitMethod:
        return "post" if self.ensemble is not None else "map"

    @property
    def points(self) -> List[HyperPoint]:
        if self.ensemble is None:
            return [self.mode]
        informative = self.prior.informative
        return [HyperPoint.from_vector(x, self.dataset.d, informative) for x in self.ensemble.particles]

    def training_data(self) -> Dataset:
        """Training data on the observed response scale."""
        return self.response.restore(self.dataset)


@dataclass(frozen=True)
class Prediction:
    """Per-query mean, variance and central 95% interval."""

    mean: np.ndarray
    variance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def interval(self) -> np.ndarray:
        return np.column_stack([self.lower, self.upper])


@dataclass(frozen=True)
class TermInterval:
    label: str
    estimate: float
    lower: float
    upper: float
    flagged: bool


@dataclass(frozen=True)
class PosteriorDraws:
    beta: np.ndarray
    tau2: np.ndarray
    particle: np.ndarray


@dataclass(frozen=True)
class CvResult:
    best_nu: float
    grid: Tuple[float, ...]
    scores: Tuple[float, ...]


def attach_conditionals(fit: FitResult) -> FitResult:
    """Compute the beta (and tau2) conditionals at every fitted point."""
    orders = fit.basis.orders
    fit.beta_conditionals = [
        beta_conditional(fit.dataset, fit.G, fit.prior, pt, orders) for pt in fit.points
    ]
    if not fit.prior.informative:
        fit.tau2_conditionals = [tau2_conditional(fit.dataset, fit.G, fit.prior, pt) for pt in fit.points]
    return fit


def default_init_box(d: int, informative: bool) -> List[List[float]]:
    box = [[0.0, 0.1]] * d + [[0.1, 0.4]]
    if informative:
        box.append([0.5, 2.0])
    return box


def fit_gp(
    dataset: Dataset,
    basis: BasisSpec,
    prior: PriorConfig,
    method: FitMethod = "post",
    N: int = 100,
    h: float = 0.02,
    step_size: float = 1.0,
    init_box: Optional[Sequence[Sequence[float]]] = None,
    config: EviConfig = EviConfig(),
    rng: Optional[np.random.Generator] = None,
    standardize: bool = True,
) -> FitResult:
    """
    Fit the GP hyperparameters with EVI-post or EVI-MAP

    Args:
        dataset: Training data in the unit cube
        basis: Mean basis
        prior: Prior configuration
        method: "post" (N particles) or "map" (single particle)
        N: Number of particles for "post"
        h: KDE bandwidth
        step_size: Proximal step
        init_box: Natural-scale box for initial draws (omega..., eta[, tau2])
        config: EVI solver settings
        rng: Random generator for the initial draws
        standardize: Center y and divide by its standard deviation before
            fitting, so the beta prior scale does not depend on the units of y

    Returns:
        FitResult with conditionals attached
    """
    if method not in ("post", "map"):
        raise InvalidArgumentError(f"Unknown fit method: {method}")
    rng = rng or np.random.default_rng()
    response = ResponseScale.from_responses(dataset.y) if standardize else ResponseScale()
    dataset = response.apply(dataset)
    target = PosteriorTarget(dataset, basis, prior)
    box = init_box if init_box is not None else default_init_box(dataset.d, prior.informative)
    start = init_particles(N if method == "post" else 1, target.dim, box, rng, h=h, step_size=step_size)

    if method == "post":
        result = evi_im(start, target, target.grad, config)
        fit = FitResult(
            prior=prior,
            basis=basis,
            dataset=dataset,
            G=target.G,
            ensemble=result.ensemble,
            energy_trace=result.energy_trace,
            status=result.status,
            aborted=result.aborted,
            response=response,
        )
    else:
        result = evi_map(target.point(start.particles[0]), target, target.grad, config, step_size=step_size)
        fit = FitResult(
            prior=prior,
            basis=basis,
            dataset=dataset,
            G=target.G,
            mode=result.mode,
            energy_trace=result.value_trace,
            status=result.status,
            aborted=result.aborted,
            response=response,
        )
    return attach_conditionals(fit)


def _conditionals_for(
    fit: FitResult,
    point: HyperPoint,
    index: Optional[int] = None,
) -> Tuple[BetaConditional, Optional[Tau2Conditional]]:
    """Cached conditionals of fitted point `index`, or fresh ones for any other point."""
    if index is not None and index < len(fit.beta_conditionals):
        tau = fit.tau2_conditionals[index] if fit.tau2_conditionals else None
        return fit.beta_conditionals[index], tau
    beta = beta_conditional(fit.dataset, fit.G, fit.prior, point, fit.basis.orders)
    tau = None if fit.prior.informative else tau2_conditional(fit.dataset, fit.G, fit.prior, point)
    return beta, tau


def _predict_point(
    fit: FitResult,
    point: HyperPoint,
    Xq: np.ndarray,
    index: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predictive mean and variance on the fitted response scale

    Non-informative prior: the universal-kriging form with tau2 replaced by
    its conditional estimate tau2_hat, and beta integrated out.

    Informative prior: tau2 is the point's own coordinate and beta is
    integrated against its Gaussian conditional N(beta_hat, sigma_beta),
    giving tau2 * (1 - k'A^-1 k) + c' sigma_beta c with c = g(x) - G'A^-1 k.
    This is not the flat-prior formula with tau2 substituted. The two agree
    only in the limit nu2 -> infinity, where sigma_beta -> tau2 (G'A^-1 G)^-1.
    """
    data = fit.dataset
    factor = cov_factor(data, KernelParams(point.omega), point.eta, fit.prior.jitter)
    beta, tau = _conditionals_for(fit, point, index)

    Gq = design_matrix(fit.basis, Xq)
    Kq = cross_kernel_matrix(Xq, data.X, KernelParams(point.omega))
    Ainv_k = factor.solve(Kq.T)
    mean = Gq @ beta.beta_hat + Ainv_k.T @ (data.y - fit.G @ beta.beta_hat)

    C = Gq - Ainv_k.T @ fit.G
    explained = np.sum(Kq * Ainv_k.T, axis=1)
    # under the flat prior sigma_beta already carries tau2_hat
    tau2 = point.tau2 if fit.prior.informative else tau.scale
    variance = tau2 * (1.0 - explained) + np.sum((C @ beta.sigma_beta) * C, axis=1)

    if np.any(variance < -1e-8):
        raise NumericalError(
            "Negative predictive variance",
            diagnostics={"min_variance": float(variance.min()), "point": point.to_vector().tolist()},
        )
    return mean, np.maximum(variance, 0.0)


def predict_at(fit: FitResult, point: HyperPoint, x_query: np.ndarray) -> Tuple[float, float]:
    """
    Posterior predictive mean and variance at one query, given the hyperparameters

    Args:
        fit: Fitted model
        point: Hyperparameter point
        x_query: d-vector in the unit cube

    Returns:
        (mean, variance)
    """
    x_query = np.atleast_1d(np.asarray(x_query, dtype=float))
    if x_query.shape != (fit.dataset.d,):
        raise InvalidArgumentError(f"Expected a query of dimension {fit.dataset.d}, got shape {x_query.shape}")
    mean, variance = _predict_point(fit, point, x_query[None, :])
    mean, variance = fit.response.restore_mean(mean), fit.response.restore_variance(variance)
    return float(mean[0]), float(variance[0])


def predict_aggregate(fit: FitResult, X_query: np.ndarray, threads: int = 1) -> Prediction:
    """
    Predictions at a batch of queries

    EVI-MAP predicts at the mode. EVI-post mixes the particles: the mean is
    the average particle mean, the variance adds the within- and
    between-particle parts.
    """
    X_query = np.asarray(X_query, dtype=float).reshape(-1, fit.dataset.d)
    points = fit.points
    if not points:
        raise InvalidStateError("Cannot predict from an empty ensemble")
    if X_query.shape[0] == 0:
        empty = np.empty(0)
        return Prediction(mean=empty, variance=empty, lower=empty, upper=empty)

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda i: _predict_point(fit, points[i], X_query, i), range(len(points))))
    else:
        parts = [_predict_point(fit, pt, X_query, i) for i, pt in enumerate(points)]

    means = np.array([m for m, _ in parts])
    variances = np.array([v for _, v in parts])
    mean = fit.response.restore_mean(means.mean(axis=0))
    variance = fit.response.restore_variance(variances.mean(axis=0) + means.var(axis=0))
    half = 1.96 * np.sqrt(variance)
    return Prediction(mean=mean, variance=variance, lower=mean - half, upper=mean + half)


def beta_intervals(
    fit: FitResult,
    level: float = 0.95,
    source: Optional[FitMethod] = None,
    rng: Optional[np.random.Generator] = None,
    draws: int = INTERVAL_DRAWS,
) -> List[TermInterval]:
    """
    Credible intervals for the active mean coefficients

    Args:
        fit: Fitted model
        level: Central coverage
        source: "map" for Gaussian intervals at the mode, "post" for pooled
            draws over the particles; defaults to the fit's own method
        rng: Random generator for the "post" path
        draws: Repetitions per particle for the "post" path

    Returns:
        One TermInterval per active term on the fitted response scale;
        flagged when the interval excludes 0
    """
    if not 0 < level < 1:
        raise InvalidArgumentError(f"level must lie in (0, 1), got {level}")
    source = source or fit.method
    labels = fit.basis.labels

    if source == "map":
        if fit.mode is None:
            raise InvalidStateError("MAP intervals need a fitted mode")
        cond, _ = _conditionals_for(fit, fit.mode, 0 if fit.ensemble is None else None)
        center = cond.beta_hat
        half = norm.ppf(0.5 + level / 2) * np.sqrt(np.diag(cond.sigma_beta))
        lower, upper = center - half, center + half
    else:
        if fit.ensemble is None:
            raise InvalidStateError("Particle intervals need a fitted ensemble")
        rng = rng or np.random.default_rng()
        pooled = np.array([
            sample_beta(cond, rng) for _ in range(draws) for cond in fit.beta_conditionals
        ])
        tail = 50.0 * (1.0 - level)
        lower, upper = np.percentile(pooled, [tail, 100.0 - tail], axis=0)
        center = np.mean([c.beta_hat for c in fit.beta_conditionals], axis=0)

    return [
        TermInterval(
            label=labels[j],
            estimate=float(center[j]),
            lower=float(lower[j]),
            upper=float(upper[j]),
            flagged=bool(lower[j] > 0 or upper[j] < 0),
        )
        for j in range(len(labels))
    ]


def select_terms(fit: FitResult, flags: Sequence[bool]) -> BasisSpec:
    """Deactivate unflagged terms; the intercept always stays."""
    basis = fit.basis
    flags = [bool(f) for f in flags]
    if len(flags) != basis.p:
        raise InvalidArgumentError(f"Expected {basis.p} flags, got {len(flags)}")
    active = iter(flags)
    mask = [next(active) if on else False for on in basis.active_mask]
    mask[0] = True
    return basis.with_mask(mask)


def _cv_score(
    dataset: Dataset,
    basis: BasisSpec,
    prior: PriorConfig,
    folds: List[np.ndarray],
    fit_kwargs: dict,
    seed: int,
) -> float:
    scores = []
    all_idx = np.arange(dataset.n)
    for k, held in enumerate(folds):
        train = dataset.subset(np.setdiff1d(all_idx, held))
        test = dataset.subset(held)
        fit = fit_gp(train, basis, prior, method="map", rng=np.random.default_rng([seed, k]), **fit_kwargs)
        pred = predict_aggregate(fit, test.X)
        scores.append(standardized_rmspe(pred.mean, test.y))
    return float(np.mean(scores))


def cv_select_nu(
    dataset: Dataset,
    basis: BasisSpec,
    prior_template: PriorConfig,
    grid: Sequence[float] = DEFAULT_NU_GRID,
    folds: int = 5,
    config: EviConfig = EviConfig(),
    seed: int = 0,
    step_size: float = 0.1,
    h: float = 0.001,
    init_box: Optional[Sequence[Sequence[float]]] = None,
    threads: int = 1,
    standardize: bool = True,
) -> CvResult:
    """
    Choose the shrinkage scale nu by k-fold cross-validation

    Every grid value is scored by the mean standardized RMSPE of EVI-MAP
    fits over the folds; folds come from a seeded shuffle and are shared by
    all grid values.

    Args:
        dataset: Training data
        basis: Mean basis
        prior_template: Informative prior whose nu2 is replaced by nu**2
        grid: Candidate nu values (0 is dropped)
        folds: Number of folds
        config: EVI settings; max_outer is capped for the fold fits
        seed: Seed of the fold shuffle and of the initial points
        step_size: Proximal step of the fold fits
        h: KDE bandwidth of the fold fits
        init_box: Initial box of the fold fits
        threads: Worker threads over grid values
        standardize: Standardize the responses of every fold fit

    Returns:
        CvResult with the argmin and the full curve
    """
    if not prior_template.informative:
        raise InvalidArgumentError("nu only enters the informative beta prior")
    if folds < 2 or dataset.n < folds:
        raise InvalidArgumentError(f"Need 2 <= folds <= n, got folds={folds}, n={dataset.n}")
    grid = tuple(float(v) for v in grid if v > 0)
    if not grid:
        raise InvalidArgumentError("The nu grid has no positive value")
    if min(len(f) for f in np.array_split(np.arange(dataset.n), folds)) < 2:
        raise InvalidArgumentError(f"Folds of {dataset.n} points into {folds} leave fewer than 2 test points")

    perm = np.random.default_rng(seed).permutation(dataset.n)
    fold_idx = np.array_split(perm, folds)
    fit_kwargs = dict(
        h=h,
        step_size=step_size,
        init_box=init_box,
        config=replace(config, max_outer=min(config.max_outer, CV_MAX_OUTER)),
        standardize=standardize,
    )
    r = prior_template.beta_prior.r

    def score(nu: float) -> float:
        prior = replace(prior_template, beta_prior=Informative(nu2=nu ** 2, r=r))
        try:
            value = _cv_score(dataset, basis, prior, fold_idx, fit_kwargs, seed)
        except NumericalError as e:
            logger.warning("CV at nu=%.2f failed: %s", nu, e)
            value = np.inf
        logger.debug("nu=%.2f cv rmspe=%.6g", nu, value)
        return value

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = tuple(pool.map(score, grid))
    else:
        scores = tuple(score(nu) for nu in grid)

    if not np.any(np.isfinite(scores)):
        raise NumericalError("Every cross-validation fit failed", diagnostics={"grid": list(grid)})
    best = grid[int(np.argmin(scores))]
    logger.info("Selected nu=%.2f (cv rmspe %.6g)", best, min(scores))
    return CvResult(best_nu=best, grid=grid, scores=scores)


def posterior_surface(
    dataset: Dataset,
    G: np.ndarray,
    prior: PriorConfig,
    log_omega_grid: Sequence[float],
    log_eta_grid: Sequence[float],
    orders: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    -V on a (log omega, log eta) mesh for one-dimensional inputs

    Returns:
        Matrix with entry [i, j] at (log_omega_grid[i], log_eta_grid[j]);
        points where the covariance cannot be factored are -inf
    """
    if dataset.d != 1 or prior.informative:
        raise InvalidArgumentError("posterior_surface covers d=1 under the flat beta prior")
    surface = np.empty((len(log_omega_grid), len(log_eta_grid)))
    for i, lw in enumerate(log_omega_grid):
        for j, le in enumerate(log_eta_grid):
            try:
                surface[i, j] = -log_posterior(dataset, G, prior, HyperPoint([lw], le), orders)
            except NumericalError:
                surface[i, j] = -np.inf
    return surface


def sample_posterior(fit: FitResult, draws_per_particle: int, rng: np.random.Generator) -> PosteriorDraws:
    """
    Joint draws of (beta, tau2) conditional on each fitted point

    Under the flat beta prior tau2 is drawn first and beta given tau2;
    under the informative prior tau2 is the particle's own coordinate. Both
    are on the fitted response scale.
    """
    if draws_per_particle < 1:
        raise InvalidArgumentError(f"draws_per_particle must be >= 1, got {draws_per_particle}")
    betas, taus, owners = [], [], []
    for i, pt in enumerate(fit.points):
        cond, tau_cond = _conditionals_for(fit, pt, i)
        for _ in range(draws_per_particle):
            if fit.prior.informative:
                tau2 = pt.tau2
                beta = sample_beta(cond, rng)
            else:
                tau2 = sample_tau2(tau_cond, rng)
                scaled = replace(cond, sigma_beta=cond.sigma_beta * (tau2 / tau_cond.scale))
                beta = sample_beta(scaled, rng)
            betas.append(beta)
            taus.append(tau2)
            owners.append(i)
    return PosteriorDraws(beta=np.array(betas), tau2=np.array(taus), particle=np.array(owners))
