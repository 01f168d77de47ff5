import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dajko.grid import (GridSpec, QuadratureWeights, StateField, gramian_apply, gramian_solve, trapezoid_weights,
                        weighted_inner_product, weighted_norm)

from conftest import random_field


def test_grid_nodes_and_spacing():
    g = GridSpec(-1.0, 1.0, 100, 10)
    assert g.dx == pytest.approx(0.02)
    assert g.dt == pytest.approx(0.1)
    assert g.x[0] == -1.0 and g.x[-1] == 1.0
    assert g.t[0] == 0.0 and g.t[-1] == 1.0


@pytest.mark.parametrize("kw", [dict(L=1.0, R=1.0), dict(Nx=0), dict(Nt=0), dict(Nx=2.5)])
def test_grid_rejects_bad_input(kw):
    args = dict(L=0.0, R=1.0, Nx=4, Nt=2) | kw
    with pytest.raises(ValueError):
        GridSpec(**args)


def test_trapezoid_weights_layout():
    w = trapezoid_weights(5, 0.5)
    np.testing.assert_allclose(w, [0.25, 0.5, 0.5, 0.5, 0.5, 0.25])
    q = QuadratureWeights.from_grid(GridSpec(0.0, 1.0, 7, 9))
    assert q.wt.sum() == pytest.approx(1.0, abs=1e-15)
    assert (q.wx > 0).all() and (q.wt > 0).all()


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), L=st.floats(-3, 0), width=st.floats(0.1, 5),
       Nx=st.integers(1, 60))
def test_trapezoid_exact_for_affine(a, b, L, width, Nx):
    g = GridSpec(L, L + width, Nx, 1)
    q = QuadratureWeights.from_grid(g)
    R = L + width
    exact = a * (R * R - L * L) / 2 + b * (R - L)
    assert np.dot(q.wx, a * g.x + b) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_inner_product_ones_field():
    for Nx, Nt in [(3, 2), (10, 7)]:
        g = GridSpec(0.0, 1.0, Nx, Nt)
        q = QuadratureWeights.from_grid(g)
        ones = StateField(np.ones((2, Nx + 1, Nt + 1)))
        assert weighted_inner_product(ones, ones, q) == pytest.approx(2.0, rel=1e-14)
        assert weighted_norm(ones, q) == pytest.approx(np.sqrt(2.0), rel=1e-14)
        assert weighted_inner_product(StateField.zeros(g), ones, q) == 0.0


def test_inner_product_matches_double_loop(rng):
    g = GridSpec(-0.5, 1.5, 4, 2)
    q = QuadratureWeights.from_grid(g)
    v, w = random_field(rng, g), random_field(rng, g)
    direct = 0.0
    for k in range(g.Nt + 1):
        for j in range(g.Nx + 1):
            direct += q.wt[k] * q.wx[j] * (v.rho[j, k] * w.rho[j, k] + v.mom[j, k] * w.mom[j, k])
    assert weighted_inner_product(v, w, q) == pytest.approx(direct, rel=1e-13)


def test_inner_product_bilinear_symmetric(rng):
    g = GridSpec(-1.0, 1.0, 9, 4)
    q = QuadratureWeights.from_grid(g)
    for _ in range(3):
        u, v, w = (random_field(rng, g) for _ in range(3))
        a, b = rng.standard_normal(2)
        lhs = weighted_inner_product(u * a + v * b, w, q)
        rhs = a * weighted_inner_product(u, w, q) + b * weighted_inner_product(v, w, q)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)
        assert weighted_inner_product(u, v, q) == pytest.approx(weighted_inner_product(v, u, q), rel=1e-14)
        alpha = rng.standard_normal()
        assert weighted_norm(u * alpha, q) == pytest.approx(abs(alpha) * weighted_norm(u, q), rel=1e-13)


def test_shape_mismatch_raises():
    g = GridSpec(0.0, 1.0, 4, 2)
    q = QuadratureWeights.from_grid(GridSpec(0.0, 1.0, 5, 2))
    with pytest.raises(ValueError):
        weighted_inner_product(StateField.zeros(g), StateField.zeros(g), q)


def test_gramian_entries_and_round_trip(rng):
    g = GridSpec(0.0, 1.0, 2, 2)
    q = QuadratureWeights.from_grid(g)
    G = gramian_apply(StateField(np.ones((2, 3, 3))), q)
    assert G.rho[1, 1] == pytest.approx(0.25)
    assert G.rho[0, 0] == pytest.approx(1 / 16)
    v = random_field(rng, GridSpec(-1.0, 2.0, 13, 5))
    q2 = QuadratureWeights.from_grid(GridSpec(-1.0, 2.0, 13, 5))
    np.testing.assert_allclose(gramian_solve(gramian_apply(v, q2), q2).data, v.data, rtol=1e-15)


def test_state_field_parts():
    rho = np.arange(6.0).reshape(3, 2)
    u = StateField.from_parts(rho, -rho)
    np.testing.assert_array_equal(u.rho, rho)
    np.testing.assert_array_equal(u.mom, -rho)
    np.testing.assert_array_equal(u.final_slice, rho[:, -1])
    c = u.copy()
    c.data[0, 0, 0] = 99.0
    assert u.rho[0, 0] == 0.0
