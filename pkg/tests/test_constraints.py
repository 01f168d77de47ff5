import numpy as np
import pytest

from dajko import _kernels
from dajko.constraints import (BLOCK_ORDER, BlockId, apply_A, apply_A_adjoint, assemble_constraints, assemble_matrix,
                               block_residuals, block_sizes, estimate_operator_norm, project_onto_Cdelta,
                               prox_conjugate_indicator, update_targets)
from dajko.grid import GridSpec, QuadratureWeights, StateField, weighted_inner_product

from conftest import random_field, small_system


def direct_residuals(grid, q, rho0, u):
    """Squared residuals written out from the difference formulas, loop by loop."""
    rho, m = u.rho, u.mom
    Nx, Nt, dx, dt = grid.Nx, grid.Nt, grid.dx, grid.dt
    div = 0.0
    for k in range(1, Nt + 1):
        for j in range(Nx + 1):
            if j == 0:
                dm = (m[1, k] - m[0, k]) / dx
            elif j == Nx:
                dm = (m[Nx, k] - m[Nx - 1, k]) / dx
            else:
                dm = (m[j + 1, k] - m[j - 1, k]) / (2 * dx)
            div += q.wt[k] * q.wx[j] * ((rho[j, k] - rho[j, k - 1]) / dt + dm) ** 2
    flux = sum(q.wt[k] * (m[0, k] ** 2 + m[Nx, k] ** 2) for k in range(Nt + 1))
    mass0 = sum(q.wx[j] * rho0[j] for j in range(Nx + 1))
    mass = sum(q.wt[k] * (sum(q.wx[j] * rho[j, k] for j in range(Nx + 1)) - mass0) ** 2 for k in range(1, Nt + 1))
    init = sum(q.wx[j] * (rho[j, 0] - rho0[j]) ** 2 for j in range(Nx + 1))
    return {BlockId.DIVERGENCE: div, BlockId.FLUX: flux, BlockId.MASS: mass, BlockId.INITIAL: init}


def stationary(grid, rho0):
    return StateField.from_parts(np.repeat(rho0[:, None], grid.Nt + 1, axis=1),
                                 np.zeros((grid.Nx + 1, grid.Nt + 1)))


def test_block_layout():
    g = GridSpec(0.0, 1.0, 5, 3)
    sys = assemble_constraints(g, QuadratureWeights.from_grid(g), np.ones(6))
    assert block_sizes(g) == (18, 8, 3, 6)
    assert [blk.block_id for blk in sys.blocks] == list(BLOCK_ORDER)
    assert sys.n_rows == 35
    assert sys.deltas == (1e-5,) * 4


def test_stationary_point_is_feasible():
    grid, q, rho0 = small_system()
    sys = assemble_constraints(grid, q, rho0)
    res = block_residuals(sys, stationary(grid, rho0))
    assert max(res.values()) < 1e-13


def test_single_flux_entry():
    grid, q, rho0 = small_system(Nx=6, Nt=5)
    sys = assemble_constraints(grid, q, rho0)
    u = stationary(grid, rho0)
    u.data[1, 0, 4] = 3.0  # m_{1,5} in 1-based indexing
    res = block_residuals(sys, u)
    assert res[BlockId.FLUX] == pytest.approx(np.sqrt(q.wt[4]) * 3.0, rel=1e-14)


@pytest.mark.parametrize("Nx,Nt", [(5, 3), (2, 1), (8, 4)])
def test_residuals_match_direct_formulas(rng, Nx, Nt):
    grid, q, rho0 = small_system(Nx, Nt, L=-0.3, R=1.1)
    sys = assemble_constraints(grid, q, rho0)
    u = random_field(rng, grid)
    got = block_residuals(sys, u)
    want = direct_residuals(grid, q, rho0, u)
    for bid in BLOCK_ORDER:
        assert got[bid] ** 2 == pytest.approx(want[bid], rel=1e-12)


def test_apply_matches_explicit_matrix(rng):
    grid, q, rho0 = small_system(4, 2)
    sys = assemble_constraints(grid, q, rho0)
    A = assemble_matrix(grid, q)
    for _ in range(5):
        u = random_field(rng, grid)
        np.testing.assert_allclose(apply_A(sys, u), A @ u.data.ravel(), rtol=1e-13, atol=1e-13)
    assert np.all(apply_A(sys, StateField.zeros(grid)) == 0.0)


def test_linearity(rng):
    grid, q, rho0 = small_system(7, 3)
    sys = assemble_constraints(grid, q, rho0)
    u, v = random_field(rng, grid), random_field(rng, grid)
    np.testing.assert_allclose(apply_A(sys, u + v), apply_A(sys, u) + apply_A(sys, v), rtol=1e-12, atol=1e-12)


def test_adjoint_identity(rng):
    grid, q, rho0 = small_system(6, 3)
    sys = assemble_constraints(grid, q, rho0)
    for _ in range(20):
        u = random_field(rng, grid)
        psi = rng.standard_normal(sys.n_rows)
        lhs = float(psi @ apply_A(sys, u))
        rhs = weighted_inner_product(apply_A_adjoint(sys, psi), u, q)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
    assert np.all(apply_A_adjoint(sys, np.zeros(sys.n_rows)).data == 0.0)


def test_adjoint_against_matrix_transpose(rng):
    grid, q, rho0 = small_system(5, 3)
    sys = assemble_constraints(grid, q, rho0)
    A = assemble_matrix(grid, q)
    psi = rng.standard_normal(sys.n_rows)
    want = (A.T @ psi).reshape(2, grid.Nx + 1, grid.Nt + 1) / q.cell
    np.testing.assert_allclose(apply_A_adjoint(sys, psi).data, want, rtol=1e-12, atol=1e-12)


def test_adjoint_of_unit_flux_entry():
    grid, q, rho0 = small_system(6, 3)
    sys = assemble_constraints(grid, q, rho0)
    k = 2
    e = np.zeros(sys.n_rows)
    e[sys.block(BlockId.FLUX).rows.start + k] = 1.0  # left boundary, time index k
    out = apply_A_adjoint(sys, e).data
    expected = np.zeros_like(out)
    expected[1, 0, k] = np.sqrt(q.wt[k]) / (q.wt[k] * q.wx[0])
    np.testing.assert_allclose(out, expected, rtol=1e-14)


def test_kernels_agree_with_numpy(rng):
    grid, q, rho0 = small_system(11, 4)
    sys = assemble_constraints(grid, q, rho0)
    u = random_field(rng, grid)
    psi = rng.standard_normal(sys.n_rows)
    out = np.empty(sys.n_rows)
    sys.op.apply_into(u.data, out)
    np.testing.assert_allclose(out, sys.op.apply(u.data), rtol=1e-14, atol=1e-13)
    outT = np.empty_like(u.data)
    sys.op.apply_T_into(psi, outT)
    np.testing.assert_allclose(outT, sys.op.apply_T(psi), rtol=1e-14, atol=1e-13)


def test_projection_properties(rng):
    grid, q, rho0 = small_system(5, 2)
    sys = assemble_constraints(grid, q, rho0, deltas=(0.5, 0.3, 0.2, 0.1))
    b = sys.b
    assert np.array_equal(project_onto_Cdelta(sys, b), b)
    for _ in range(50):
        x, y = b + rng.standard_normal(b.size), b + rng.standard_normal(b.size)
        px, py = project_onto_Cdelta(sys, x), project_onto_Cdelta(sys, y)
        np.testing.assert_allclose(project_onto_Cdelta(sys, px), px, rtol=1e-14, atol=1e-14)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12
        for blk in sys.blocks:
            assert np.linalg.norm(px[blk.rows] - blk.b) <= blk.delta * (1 + 1e-12)


def test_projection_radial_scaling():
    g = GridSpec(0.0, 1.0, 3, 1)
    q = QuadratureWeights.from_grid(g)
    sys = assemble_constraints(g, q, np.zeros(4), deltas=(1.0, 1.0, 1.0, 1.0))
    x = np.zeros(sys.n_rows)
    rows = sys.block(BlockId.DIVERGENCE).rows
    x[rows] = 0.0
    x[rows.start] = 2.0
    np.testing.assert_allclose(project_onto_Cdelta(sys, x)[rows], x[rows] / 2)


def test_moreau_identity(rng):
    grid, q, rho0 = small_system(5, 2)
    sys = assemble_constraints(grid, q, rho0, deltas=(0.5, 0.3, 0.2, 0.1))
    assert np.all(prox_conjugate_indicator(assemble_constraints(grid, q, np.zeros(6)), np.zeros(sys.n_rows), 1.0)
                  == 0.0)
    sigma = 0.5
    inside = sigma * project_onto_Cdelta(sys, rng.standard_normal(sys.n_rows))
    np.testing.assert_allclose(prox_conjugate_indicator(sys, inside, sigma), 0.0, atol=1e-14)
    phi = 3 * rng.standard_normal(sys.n_rows)
    out = prox_conjugate_indicator(sys, phi, sigma)
    # direct ball projection, block by block
    y = phi / sigma
    proj = y.copy()
    for blk in sys.blocks:
        d = y[blk.rows] - blk.b
        proj[blk.rows] = blk.b + d * min(1.0, blk.delta / np.linalg.norm(d))
    np.testing.assert_allclose(out + sigma * proj, phi, rtol=1e-13, atol=1e-13)
    # kernel version
    offsets = np.array([blk.rows.start for blk in sys.blocks] + [sys.n_rows])
    Au = rng.standard_normal(sys.n_rows)
    got = np.empty(sys.n_rows)
    _kernels.dual_update(phi, Au, sigma, sys.b, offsets, np.array(sys.deltas), got)
    np.testing.assert_allclose(got, prox_conjugate_indicator(sys, phi + sigma * Au, sigma), rtol=1e-12, atol=1e-12)


def test_operator_norm_against_dense():
    grid, q, rho0 = small_system(4, 2)
    sys = assemble_constraints(grid, q, rho0)
    A = assemble_matrix(grid, q).toarray()
    AAstar = A @ (A.T / np.tile(q.cell.ravel(), 2)[:, None])
    dense = float(np.linalg.eigvalsh(0.5 * (AAstar + AAstar.T)).max())
    est = estimate_operator_norm(sys, iters=5000, seed=3)
    assert est == pytest.approx(dense, rel=1e-6)
    assert est <= dense * (1 + 1e-12)


def test_flux_only_norm():
    grid, q, _ = small_system(4, 2)
    A = assemble_matrix(grid, q).toarray()
    Af = A[assemble_constraints(grid, q, np.zeros(5)).block(BlockId.FLUX).rows]
    AAstar = Af @ (Af.T / np.tile(q.cell.ravel(), 2)[:, None])
    # each flux row r has (A A*)_rr = sqrt(wt_k)^2 / (wt_k wx_boundary) and rows decouple
    dense = float(np.linalg.eigvalsh(AAstar).max())
    assert dense == pytest.approx(1.0 / q.wx[0], rel=1e-12)


def test_operator_norm_monotone_and_deterministic():
    grid, q, rho0 = small_system(8, 3)
    sys = assemble_constraints(grid, q, rho0)
    ests = [estimate_operator_norm(sys, iters=n, seed=7) for n in (1, 5, 20, 100)]
    assert all(a <= b for a, b in zip(ests, ests[1:]))
    assert estimate_operator_norm(sys, 50, seed=1) == estimate_operator_norm(sys, 50, seed=1)


def test_update_targets(rng):
    grid, q, rho0 = small_system(6, 3)
    sys = assemble_constraints(grid, q, rho0)
    same = update_targets(sys, rho0)
    u = random_field(rng, grid)
    assert block_residuals(same, u) == block_residuals(sys, u)
    zero = update_targets(sys, np.zeros(grid.Nx + 1))
    assert block_residuals(zero, StateField.zeros(grid))[BlockId.INITIAL] == 0.0
    new = rng.uniform(0.2, 2.0, grid.Nx + 1)
    upd = update_targets(sys, new)
    assert max(block_residuals(upd, stationary(grid, new)).values()) < 1e-13
    assert upd.op is sys.op
    for bid in (BlockId.DIVERGENCE, BlockId.FLUX):
        np.testing.assert_array_equal(upd.block(bid).b, sys.block(bid).b)


def test_bad_profile_shape():
    grid, q, _ = small_system(6, 3)
    with pytest.raises(ValueError):
        assemble_constraints(grid, q, np.ones(3))
