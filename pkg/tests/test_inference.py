import numpy as np
import pytest

import config
from evigp import (
    Dataset,
    EviConfig,
    FitResult,
    HyperPoint,
    Informative,
    InvalidArgumentError,
    InvalidStateError,
    ParticleEnsemble,
    PosteriorTarget,
    PriorConfig,
    ResponseScale,
    attach_conditionals,
    beta_intervals,
    build_basis,
    cv_select_nu,
    design_matrix,
    evi_map,
    fit_gp,
    get_benchmark,
    make_dataset,
    maximin_lhs,
    posterior_surface,
    predict_aggregate,
    predict_at,
    sample_posterior,
    select_terms,
    standardized_rmspe,
)

TOY = get_benchmark("toy")
TOY_PRIOR = PriorConfig(b_omega=0.5 / config.TOY_RANGE ** 2)


def toy_data(n=11, seed=1):
    return make_dataset(TOY, maximin_lhs(n, 1, seed=seed, restarts=2), np.random.default_rng(seed))


def fit_at(dataset, basis, prior, point):
    fit = FitResult(prior=prior, basis=basis, dataset=dataset, G=design_matrix(basis, dataset.X), mode=point)
    return attach_conditionals(fit)


def test_predict_at_matches_dense_oracle():
    dataset = Dataset(X=np.array([[0.1], [0.7]]), y=np.array([1.0, 2.5]))
    basis = build_basis(1, 0)
    point = HyperPoint([np.log(2.0)], np.log(0.3))
    fit = fit_at(dataset, basis, PriorConfig(), point)

    X = dataset.X[:, 0]
    A = np.exp(-2.0 * (X[:, None] - X[None, :]) ** 2) + (0.3 + 1e-10) * np.eye(2)
    A_inv = np.linalg.inv(A)
    one = np.ones(2)
    Q = one @ A_inv @ one
    beta_hat = one @ A_inv @ dataset.y / Q
    s2 = dataset.y @ A_inv @ dataset.y - Q * beta_hat ** 2
    tau2_hat = 1.0 + s2
    k = np.exp(-2.0 * (0.4 - X) ** 2)
    c = 1.0 - k @ A_inv @ one
    mean = beta_hat + k @ A_inv @ (dataset.y - beta_hat)
    var = tau2_hat * (1.0 - k @ A_inv @ k) + c * c * tau2_hat / Q

    got_mean, got_var = predict_at(fit, point, np.array([0.4]))
    assert got_mean == pytest.approx(mean, rel=1e-10)
    assert got_var == pytest.approx(var, rel=1e-10)


def test_interpolation_at_training_inputs():
    X = np.linspace(0.0, 1.0, 6)[:, None]
    y = np.cos(4 * X[:, 0])
    dataset = Dataset(X=X, y=y)
    point = HyperPoint([np.log(50.0)], np.log(1e-10))
    fit = fit_at(dataset, build_basis(1, 1), PriorConfig(), point)
    pred = predict_aggregate(fit, X)
    np.testing.assert_allclose(pred.mean, y, atol=1e-6)
    assert np.all(pred.variance >= 0)
    np.testing.assert_allclose(pred.variance, 0.0, atol=1e-6)


def test_particle_mixture_uses_total_variance():
    dataset = toy_data()
    basis = build_basis(1, 0)
    prior = PriorConfig()
    particles = np.array([[np.log(20.0), np.log(0.05)], [np.log(40.0), np.log(0.2)]])
    fit = attach_conditionals(FitResult(
        prior=prior, basis=basis, dataset=dataset, G=design_matrix(basis, dataset.X),
        ensemble=ParticleEnsemble(particles, h=0.02, step_size=1.0),
    ))
    xq = np.array([0.33])
    parts = [predict_at(fit, pt, xq) for pt in fit.points]
    means = np.array([m for m, _ in parts])
    variances = np.array([v for _, v in parts])

    pred = predict_aggregate(fit, xq[None, :])
    assert pred.mean[0] == pytest.approx(means.mean())
    assert pred.variance[0] == pytest.approx(variances.mean() + means.var())
    assert pred.upper[0] - pred.mean[0] == pytest.approx(1.96 * np.sqrt(pred.variance[0]))
    assert pred.interval.shape == (1, 2)


def test_empty_query_gives_empty_prediction():
    dataset = toy_data()
    fit = fit_at(dataset, build_basis(1, 0), PriorConfig(), HyperPoint([3.0], -2.0))
    pred = predict_aggregate(fit, np.empty((0, 1)))
    assert pred.mean.shape == (0,)


def test_fit_without_points_is_rejected():
    dataset = toy_data()
    basis = build_basis(1, 0)
    with pytest.raises(InvalidStateError):
        FitResult(prior=PriorConfig(), basis=basis, dataset=dataset, G=design_matrix(basis, dataset.X))


def test_map_fit_predicts_the_toy_function():
    dataset = toy_data(seed=3)
    fit = fit_gp(dataset, build_basis(1, 0), TOY_PRIOR, method="map",
                 init_box=[[5.0, 50.0], [0.01, 0.1]],
                 config=EviConfig(max_outer=100), rng=np.random.default_rng(0))
    assert fit.method == "map"
    # the unit-cube prior leaves room for the short lengthscale of x sin x
    assert fit.mode.omega[0] > 4.0
    assert len(fit.energy_trace) >= 2
    assert np.all(np.diff(fit.energy_trace) <= 1e-12)

    grid = np.linspace(0.0, 1.0, 50)[:, None]
    pred = predict_aggregate(fit, grid)
    truth = TOY.evaluate(10.0 * grid)
    assert standardized_rmspe(pred.mean, truth) < 0.5


def test_post_fit_keeps_every_particle():
    dataset = toy_data(seed=4)
    fit = fit_gp(dataset, build_basis(1, 1), PriorConfig(), method="post", N=10,
                 config=EviConfig(max_outer=5), rng=np.random.default_rng(1))
    assert fit.method == "post"
    assert len(fit.points) == 10
    assert len(fit.beta_conditionals) == 10
    assert len(fit.tau2_conditionals) == 10


def test_map_mode_matches_grid_search():
    dataset = toy_data(seed=2)
    basis = build_basis(1, 0)
    prior = PriorConfig()
    G = design_matrix(basis, dataset.X)
    log_omega = np.linspace(-2.0, 6.0, 200)
    log_eta = np.linspace(-12.0, 2.0, 200)
    surface = posterior_surface(dataset, G, prior, log_omega, log_eta)
    i, j = np.unravel_index(np.argmax(surface), surface.shape)

    target = PosteriorTarget(dataset, basis, prior)
    start = HyperPoint([log_omega[i]], log_eta[j])
    result = evi_map(start, target, target.grad, EviConfig(max_outer=500), step_size=10.0)
    mode = result.mode
    # the refined mode is never worse than the best grid cell and is stationary
    assert -target(result.x) >= surface[i, j] - 1e-12
    assert np.max(np.abs(target.grad(result.x))) < 1e-3
    assert abs(mode.log_omega[0] - log_omega[i]) < 0.5
    assert abs(mode.log_eta - log_eta[j]) < 1.0


def test_posterior_surface_preconditions():
    dataset = toy_data()
    G = np.ones((dataset.n, 1))
    with pytest.raises(InvalidArgumentError):
        posterior_surface(dataset, G, PriorConfig(beta_prior=Informative(nu2=1.0)), [0.0], [0.0])


def informative_fit(dataset, basis, nu2=4.0):
    prior = PriorConfig(beta_prior=Informative(nu2=nu2))
    point = HyperPoint([np.log(5.0)] * dataset.d, np.log(0.05), np.log(1.0))
    return fit_at(dataset, basis, prior, point)


def test_map_intervals_are_gaussian():
    dataset = toy_data()
    fit = informative_fit(dataset, build_basis(1, 2))
    intervals = beta_intervals(fit, level=0.95)
    cond = fit.beta_conditionals[0]
    assert [t.label for t in intervals] == ["1", "x1", "x1^2"]
    for j, term in enumerate(intervals):
        half = 1.959963984540054 * np.sqrt(cond.sigma_beta[j, j])
        assert term.lower == pytest.approx(cond.beta_hat[j] - half)
        assert term.upper == pytest.approx(cond.beta_hat[j] + half)
        assert term.flagged == (term.lower > 0 or term.upper < 0)


def test_particle_intervals_pool_draws():
    dataset = toy_data()
    basis = build_basis(1, 1)
    particles = np.array([[np.log(10.0), np.log(0.1)], [np.log(30.0), np.log(0.05)]])
    fit = attach_conditionals(FitResult(
        prior=PriorConfig(), basis=basis, dataset=dataset, G=design_matrix(basis, dataset.X),
        ensemble=ParticleEnsemble(particles, h=0.02, step_size=1.0),
    ))
    intervals = beta_intervals(fit, rng=np.random.default_rng(0), draws=200)
    assert len(intervals) == 2
    assert all(t.lower < t.estimate < t.upper for t in intervals)
    with pytest.raises(InvalidStateError):
        beta_intervals(fit, source="map")


def test_select_terms_keeps_intercept():
    dataset = toy_data()
    basis = build_basis(1, 2)
    fit = informative_fit(dataset, basis)
    reduced = select_terms(fit, [False, True, False])
    assert reduced.labels == ("1", "x1")
    with pytest.raises(InvalidArgumentError):
        select_terms(fit, [True])


def test_select_terms_maps_flags_onto_active_terms():
    dataset = Dataset(X=np.random.default_rng(0).uniform(size=(12, 2)), y=np.arange(12.0))
    basis = build_basis(2, 2, active_mask=[True, True, False, True, True, False])
    fit = informative_fit(dataset, basis)
    reduced = select_terms(fit, [True, False, True, True])
    assert reduced.labels == ("1", "x1^2", "x2^2")


def test_cv_select_nu_is_deterministic():
    dataset = toy_data(n=12, seed=5)
    basis = build_basis(1, 1)
    prior = PriorConfig(beta_prior=Informative(nu2=1.0))
    config = EviConfig(max_outer=20)
    kwargs = dict(grid=[0.5, 2.0], folds=3, config=config, seed=7, step_size=1.0, h=0.01)
    first = cv_select_nu(dataset, basis, prior, **kwargs)
    second = cv_select_nu(dataset, basis, prior, **kwargs)
    assert first == second
    assert first.best_nu in (0.5, 2.0)
    assert np.all(np.isfinite(first.scores))
    assert first.best_nu == first.grid[int(np.argmin(first.scores))]


def test_cv_select_nu_preconditions():
    dataset = toy_data(n=6)
    basis = build_basis(1, 0)
    with pytest.raises(InvalidArgumentError):
        cv_select_nu(dataset, basis, PriorConfig(), grid=[1.0])
    with pytest.raises(InvalidArgumentError):
        cv_select_nu(dataset, basis, PriorConfig(beta_prior=Informative(nu2=1.0)), grid=[1.0], folds=5)
    with pytest.raises(InvalidArgumentError):
        cv_select_nu(dataset, basis, PriorConfig(beta_prior=Informative(nu2=1.0)), grid=[0.0], folds=2)


def test_sample_posterior_shapes_and_ownership():
    dataset = toy_data()
    basis = build_basis(1, 1)
    particles = np.array([[np.log(10.0), np.log(0.1)], [np.log(30.0), np.log(0.05)]])
    fit = attach_conditionals(FitResult(
        prior=PriorConfig(), basis=basis, dataset=dataset, G=design_matrix(basis, dataset.X),
        ensemble=ParticleEnsemble(particles, h=0.02, step_size=1.0),
    ))
    draws = sample_posterior(fit, 5, np.random.default_rng(0))
    assert draws.beta.shape == (10, 2)
    assert np.all(draws.tau2 > 0)
    np.testing.assert_array_equal(draws.particle, [0] * 5 + [1] * 5)

    informative = informative_fit(dataset, basis)
    fixed = sample_posterior(informative, 3, np.random.default_rng(0))
    np.testing.assert_allclose(fixed.tau2, 1.0)


def test_response_scale_round_trip():
    dataset = Dataset(X=np.array([[0.0], [0.5], [1.0]]), y=np.array([68.0, 70.0, 75.0]))
    scale = ResponseScale.from_responses(dataset.y)
    fitted = scale.apply(dataset)
    assert fitted.y.mean() == pytest.approx(0.0, abs=1e-12)
    assert fitted.y.std(ddof=1) == pytest.approx(1.0)
    np.testing.assert_allclose(scale.restore(fitted).y, dataset.y, rtol=1e-14)
    assert ResponseScale.from_responses([3.0, 3.0]).scale == 1.0
    with pytest.raises(InvalidArgumentError):
        ResponseScale(scale=0.0)


def test_predictions_return_to_the_observed_scale():
    X = np.linspace(0.0, 1.0, 6)[:, None]
    raw = Dataset(X=X, y=70.0 + 5.0 * np.cos(4 * X[:, 0]))
    scale = ResponseScale.from_responses(raw.y)
    fitted = scale.apply(raw)
    basis = build_basis(1, 0)
    fit = attach_conditionals(FitResult(
        prior=PriorConfig(), basis=basis, dataset=fitted, G=design_matrix(basis, X),
        mode=HyperPoint([np.log(50.0)], np.log(1e-10)), response=scale,
    ))
    pred = predict_aggregate(fit, X)
    np.testing.assert_allclose(pred.mean, raw.y, atol=1e-5)
    mean, variance = predict_at(fit, fit.mode, np.array([0.3]))
    expected = predict_aggregate(fit, np.array([[0.3]]))
    assert mean == pytest.approx(expected.mean[0])
    assert variance == pytest.approx(expected.variance[0])
    np.testing.assert_allclose(fit.training_data().y, raw.y, rtol=1e-14)


def test_standardized_fit_is_equivariant_in_the_response():
    dataset = toy_data(seed=6)
    shifted = Dataset(X=dataset.X, y=50.0 + 3.0 * dataset.y)
    kwargs = dict(method="map", init_box=[[5.0, 50.0], [0.01, 0.1]], config=EviConfig(max_outer=50))
    fit = fit_gp(dataset, build_basis(1, 1), TOY_PRIOR, rng=np.random.default_rng(2), **kwargs)
    moved = fit_gp(shifted, build_basis(1, 1), TOY_PRIOR, rng=np.random.default_rng(2), **kwargs)
    np.testing.assert_allclose(moved.dataset.y, fit.dataset.y, atol=1e-12)
    assert moved.response.center == pytest.approx(50.0 + 3.0 * fit.response.center)
    assert moved.response.scale == pytest.approx(3.0 * fit.response.scale)

    grid = np.linspace(0.0, 1.0, 7)[:, None]
    np.testing.assert_allclose(
        predict_aggregate(moved, grid).mean, 50.0 + 3.0 * predict_aggregate(fit, grid).mean, rtol=1e-6
    )


def test_informative_fit_handles_a_large_offset():
    # beta ~ N(0, nu^2 R) only reaches responses near 70 on the standardized scale
    X = maximin_lhs(15, 1, seed=0, restarts=1).points
    dataset = Dataset(X=X, y=70.0 + 20.0 * X[:, 0] + 0.01 * np.random.default_rng(0).normal(size=15))
    prior = PriorConfig(beta_prior=Informative(nu2=4.5 ** 2))
    fit = fit_gp(dataset, build_basis(1, 1), prior, method="map",
                 init_box=[[0.01, 0.1], [0.001, 0.01], [0.5, 2.0]],
                 config=EviConfig(max_outer=50), rng=np.random.default_rng(0))
    intervals = beta_intervals(fit)
    assert intervals[1].flagged and intervals[1].estimate > 0
    grid = np.linspace(0.0, 1.0, 5)[:, None]
    np.testing.assert_allclose(predict_aggregate(fit, grid).mean, 70.0 + 20.0 * grid[:, 0], atol=0.5)
