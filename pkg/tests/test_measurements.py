import numpy as np
import pytest

from dajko.analytic import BarenblattParams, barenblatt, shifted_barenblatt_profile, support_radius
from dajko.grid import GridSpec, QuadratureWeights, StateField, weighted_inner_product
from dajko.measurements import (ConfigurationError, MeasurementSpec, add_noise, data_misfit_slice,
                                grad_observe_expectation, grad_observe_variance, make_data_sequence, observe,
                                observe_expectation, observe_variance)

from conftest import directional_fd_errors


@pytest.fixture
def sym():
    g = GridSpec(-1.0, 1.0, 100, 4)
    return g, QuadratureWeights.from_grid(g)


def test_expectation_symmetric_profile(sym):
    g, q = sym
    rho = np.exp(-(g.x / 0.3) ** 2)
    assert abs(observe_expectation(rho, g, q)) < 1e-12


def test_unit_interval_moments():
    g = GridSpec(0.0, 1.0, 100, 1)
    q = QuadratureWeights.from_grid(g)
    ones = np.ones(101)
    assert observe_expectation(ones, g, q) == pytest.approx(0.5, rel=1e-14)
    assert observe_variance(ones, g, q) == pytest.approx(1 / 12, abs=1e-3)


def test_shifted_barenblatt_expectation(sym):
    g, q = sym
    from scipy.integrate import quad

    p = BarenblattParams()
    rho = shifted_barenblatt_profile(g, p, 0.1, 0.0)
    mass = quad(lambda s: barenblatt(s, 0.0, p), -0.3, 0.3, points=[-support_radius(0.0, p), support_radius(0.0, p)], limit=200)[0]
    assert observe_expectation(rho, g, q) == pytest.approx(0.1 * mass, rel=2e-3)


def test_point_mass_variance(sym):
    g, q = sym
    rho = np.zeros(101)
    rho[40] = 1.0 / q.wx[40]
    assert observe_variance(rho, g, q) < g.dx ** 2


def test_translation_covariance(sym):
    g, q = sym
    rho = np.zeros(101)
    rho[30:60] = np.sin(np.linspace(0, np.pi, 30)) ** 2
    # B2 centres at B1 without dividing by the mass, so invariance needs unit mass
    rho /= q.wx @ rho
    shifted = np.roll(rho, 1)
    mass = float(q.wx @ rho)
    assert observe_expectation(shifted, g, q) - observe_expectation(rho, g, q) == pytest.approx(g.dx * mass,
                                                                                               rel=1e-10)
    assert observe_variance(shifted, g, q) == pytest.approx(observe_variance(rho, g, q), rel=1e-10)


def test_expectation_linearity(sym, rng):
    g, q = sym
    a, b = rng.uniform(0, 1, 101), rng.uniform(0, 1, 101)
    lhs = observe_expectation(2.0 * a - 0.5 * b, g, q)
    assert lhs == pytest.approx(2.0 * observe_expectation(a, g, q) - 0.5 * observe_expectation(b, g, q), rel=1e-12)


def test_expectation_gradient_identity(sym, rng):
    g, q = sym
    u = StateField(rng.standard_normal((2, 101, 5)))
    G = grad_observe_expectation(u, g, q)
    assert weighted_inner_product(G, u, q) == pytest.approx(observe_expectation(u.final_slice, g, q), rel=1e-12)
    assert np.all(G.data[:, :, :-1] == 0)
    errs = directional_fd_errors(lambda r: observe_expectation(r, g, q), q.wx * q.wt[-1] * G.rho[:, -1],
                                 u.final_slice, rng, rel_step=1e-2)
    assert max(errs) < 1e-10


def test_variance_gradient(sym, rng):
    g, q = sym
    u = StateField.zeros(g)
    G0 = grad_observe_variance(u, g, q)
    np.testing.assert_allclose(G0.rho[:, -1], g.x ** 2 / q.wt[-1], rtol=1e-14)
    rho = np.exp(-((g.x - 0.2) / 0.2) ** 2)
    rho /= q.wx @ rho
    u.data[0, :, -1] = rho
    b1 = observe_expectation(rho, g, q)
    np.testing.assert_allclose(grad_observe_variance(u, g, q).rho[:, -1], (g.x - b1) ** 2 / q.wt[-1], atol=1e-12)
    u.data[0, :, -1] = rng.uniform(0.2, 1.5, 101)
    G = grad_observe_variance(u, g, q)
    errs = directional_fd_errors(lambda r: observe_variance(r, g, q), q.wx * q.wt[-1] * G.rho[:, -1],
                                 u.final_slice, rng)
    assert max(errs) < 1e-6


def test_observation_layout_and_errors(sym):
    g, q = sym
    rho = np.ones(101)
    assert observe(MeasurementSpec(True, True), rho, g, q).shape == (2,)
    assert observe(MeasurementSpec(False, True), rho, g, q)[0] == observe_variance(rho, g, q)
    M = MeasurementSpec(True, False, theta=0.5, data_sequence=[[0.1], [0.2]])
    assert M.data_for_step(2)[0] == 0.2
    with pytest.raises(ConfigurationError):
        M.data_for_step(3)
    with pytest.raises(ConfigurationError):
        data_misfit_slice(M, None, rho, g.x, q.wx)
    with pytest.raises(ConfigurationError):
        MeasurementSpec(True, True, data_sequence=[[0.1]])
    with pytest.raises(ConfigurationError):
        MeasurementSpec(True, theta=0.0)
    assert MeasurementSpec().data_for_step(5) is None


def test_misfit_value(sym):
    g, q = sym
    rho = np.ones(101)
    M = MeasurementSpec(True, True, theta=0.25)
    v = observe(M, rho, g, q) + np.array([0.1, -0.2])
    val, _ = data_misfit_slice(M, v, rho, g.x, q.wx)
    assert val == pytest.approx((0.01 + 0.04) / (2 * 0.25), rel=1e-12)


def test_make_data_sequence(sym):
    g, q = sym
    p = BarenblattParams()
    truth = lambda t: barenblatt(g.x, t, p)  # noqa: E731
    seq = make_data_sequence(truth, 5e-4, 6, g, q, True, False)
    assert len(seq) == 5
    assert max(abs(v[0]) for v in seq) < 1e-12
    seq2 = make_data_sequence(truth, 5e-4, 6, g, q, True, True)
    np.testing.assert_array_equal(np.array(seq2), np.array(make_data_sequence(truth, 5e-4, 6, g, q, True, True)))
    # the variance observation of step n is the truth at t = n tau
    assert seq2[2][1] == observe_variance(truth(3 * 5e-4), g, q)


def test_centered_barenblatt_variance():
    from scipy.integrate import quad

    p = BarenblattParams()
    g = GridSpec(-1.0, 1.0, 2000, 1)
    q = QuadratureWeights.from_grid(g)
    r = support_radius(0.0, p)
    ref = quad(lambda s: s * s * barenblatt(s, 0.0, p), -0.3, 0.3, points=[-r, r], limit=200)[0]
    # the profile has a derivative jump at the support edge, so trapezoid error is O(dx^2)
    assert observe_variance(barenblatt(g.x, 0.0, p), g, q) == pytest.approx(ref, rel=5e-5)


def test_noise_is_seeded():
    data = [np.array([1.0, 2.0])] * 3
    a, b = add_noise(data, 0.1, 7), add_noise(data, 0.1, 7)
    np.testing.assert_array_equal(np.array(a), np.array(b))
    assert not np.array_equal(np.array(a), np.array(data))
