import numpy as np
import pytest

from evigp import (
    EviConfig,
    HyperPoint,
    InvalidArgumentError,
    NumericalError,
    ParticleEnsemble,
    evi_im,
    evi_map,
    free_energy,
    free_energy_grad,
    init_particles,
    kde_kernel,
    lbfgs_minimize,
    proximal_objective,
)


def half_square(x):
    return 0.5 * float(x @ x)


def identity(x):
    return np.array(x, dtype=float)


def wavy(x):
    return 0.5 * float(x @ x) + float(np.sum(np.sin(2 * x)))


def wavy_grad(x):
    return x + 2 * np.cos(2 * x)


def test_kde_kernel_value_and_gradient():
    u, v = np.array([0.3, -0.2]), np.array([0.1, 0.4])
    value, grad = kde_kernel(u, v, h=0.5)
    assert value == pytest.approx(np.exp(-np.sum((u - v) ** 2) / 1.0))
    step = 1e-6
    numeric = [
        (kde_kernel(u + step * e, v, 0.5)[0] - kde_kernel(u - step * e, v, 0.5)[0]) / (2 * step)
        for e in np.eye(2)
    ]
    np.testing.assert_allclose(grad, numeric, rtol=1e-7)
    with pytest.raises(InvalidArgumentError):
        kde_kernel(u, v, 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_free_energy_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    N, D = int(rng.integers(1, 7)), int(rng.integers(1, 4))
    X = rng.normal(size=(N, D))
    h = float(rng.uniform(0.05, 1.0))
    analytic = free_energy_grad(ParticleEnsemble(X, h=h, step_size=1.0), wavy_grad)

    step = 1e-5
    numeric = np.zeros_like(X)
    for i in range(N):
        for k in range(D):
            plus, minus = X.copy(), X.copy()
            plus[i, k] += step
            minus[i, k] -= step
            numeric[i, k] = (
                free_energy(ParticleEnsemble(plus, h=h, step_size=1.0), wavy)
                - free_energy(ParticleEnsemble(minus, h=h, step_size=1.0), wavy)
            ) / (2 * step)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_single_particle_free_energy_is_the_potential():
    x = np.array([[1.0, 2.0]])
    assert free_energy(ParticleEnsemble(x, h=0.1, step_size=1.0), half_square) == pytest.approx(2.5)


def test_proximal_objective_at_the_anchor_is_the_free_energy():
    X = np.random.default_rng(0).normal(size=(4, 2))
    ensemble = ParticleEnsemble(X, h=0.3, step_size=0.5)
    assert proximal_objective(X, X, 0.5, wavy, 0.3) == pytest.approx(free_energy(ensemble, wavy))
    shifted = X + 0.1
    expected = np.sum(0.1 ** 2 * np.ones_like(X)) / (2 * 0.5 * 4) + free_energy(
        ParticleEnsemble(shifted, h=0.3, step_size=0.5), wavy
    )
    assert proximal_objective(shifted, X, 0.5, wavy, 0.3) == pytest.approx(expected)


def test_lbfgs_solves_a_quadratic_in_three_iterations():
    c = np.array([1.0, -2.0, 3.0])

    def fun(x):
        return 0.5 * float((x - c) @ (x - c)), x - c

    result = lbfgs_minimize(fun, np.zeros(3), EviConfig())
    np.testing.assert_allclose(result.x, c, atol=1e-8)
    assert result.n_iter <= 3
    assert result.status == "converged"


def test_lbfgs_rosenbrock():
    def fun(x):
        a, b = x
        value = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        grad = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return value, grad

    result = lbfgs_minimize(fun, np.array([-1.2, 1.0]), EviConfig(max_inner=100))
    assert result.fun < 1e-8
    assert result.n_iter <= 100
    np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-3)
    assert result.trace[-1] <= result.trace[0]


def test_proximal_point_halves_the_iterate():
    x0 = np.array([4.0, -2.0])
    result = evi_map(x0, half_square, identity, EviConfig(max_outer=6), step_size=1.0, keep_path=True)
    assert all(x.shape == (2,) for x in result.path)
    for m, x in enumerate(result.path[:5], start=1):
        np.testing.assert_allclose(x, x0 / 2 ** m, rtol=1e-10, atol=1e-14)
    assert np.all(np.diff(result.value_trace) <= 0)


def test_map_returns_hyperpoint_for_hyperpoint_start():
    start = HyperPoint(log_omega=[1.0], log_eta=-1.0)
    result = evi_map(start, half_square, identity, EviConfig(max_outer=50))
    assert isinstance(result.mode, HyperPoint)
    np.testing.assert_allclose(result.x, 0.0, atol=1e-6)


def test_single_particle_ensemble_reproduces_map_iterates():
    x0 = np.array([0.7, -1.3])
    config = EviConfig(max_outer=8)
    im = evi_im(ParticleEnsemble(x0[None, :], h=1.0, step_size=0.5), wavy, wavy_grad, config, keep_path=True)
    pp = evi_map(x0, wavy, wavy_grad, config, step_size=0.5, keep_path=True)
    assert len(im.path) == len(pp.path)
    for a, b in zip(im.path, pp.path):
        np.testing.assert_array_equal(a[0], b)
    assert im.energy_trace == pp.value_trace


def run_gaussian_target(h):
    rng = np.random.default_rng(0)
    start = ParticleEnsemble(rng.uniform(-2.0, 2.0, size=(100, 2)), h=h, step_size=1.0)
    return evi_im(start, half_square, identity, EviConfig(max_outer=100, tol=1e-6))


def test_gaussian_target_is_recovered():
    result = run_gaussian_target(h=0.1)
    X = result.ensemble.particles
    assert np.linalg.norm(X.mean(axis=0)) < 0.15
    assert np.linalg.norm(np.cov(X.T) - np.eye(2)) < 0.2
    assert np.all(np.diff(result.energy_trace) <= 1e-12)
    assert not result.aborted
    assert result.ensemble.epoch == result.epochs


def test_narrow_bandwidth_contracts_the_ensemble():
    # kernel width far below the particle spacing weakens the entropy term
    narrow = np.cov(run_gaussian_target(h=0.02).ensemble.particles.T)
    wide = np.cov(run_gaussian_target(h=0.1).ensemble.particles.T)
    assert np.trace(narrow) < np.trace(wide)
    assert np.all(np.diag(narrow) < 1.0)


def test_abort_keeps_last_valid_ensemble():
    def broken_grad(x):
        raise NumericalError("singular")

    start = ParticleEnsemble(np.array([[6.0, 0.0]]), h=1.0, step_size=1.0)
    result = evi_im(start, half_square, broken_grad, EviConfig(max_outer=3))
    assert result.aborted
    assert result.status == "aborted"
    np.testing.assert_array_equal(result.ensemble.particles, start.particles)


def test_init_particles_in_log_space():
    rng = np.random.default_rng(3)
    ensemble = init_particles(50, 3, [[0.0, 0.1], [0.0, 0.1], [0.1, 0.4]], rng, h=0.02, step_size=1.0)
    assert ensemble.particles.shape == (50, 3)
    assert np.all(ensemble.particles >= np.log(1e-4))
    assert np.all(ensemble.particles[:, :2] <= np.log(0.1))
    assert np.all((ensemble.particles[:, 2] >= np.log(0.1)) & (ensemble.particles[:, 2] <= np.log(0.4)))


def test_invalid_engine_arguments():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidArgumentError):
        init_particles(5, 2, [[0.0, 0.1]], rng)
    with pytest.raises(InvalidArgumentError):
        init_particles(5, 1, [[0.2, 0.1]], rng)
    with pytest.raises(InvalidArgumentError):
        ParticleEnsemble(np.zeros((2, 2)), h=0.0, step_size=1.0)
    with pytest.raises(InvalidArgumentError):
        EviConfig(c1=0.9, c2=0.1)
