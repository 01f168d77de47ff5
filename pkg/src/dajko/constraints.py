"""Relaxed finite-difference constraints of one JKO step.

The constraint operator ``A`` stacks four blocks (divergence, boundary flux,
mass, initial condition). Each row carries the square root of its quadrature
weight, so that ``||A_i u - b_i||_2**2`` equals the weighted least-squares
residual of the corresponding constraint. ``A`` maps the weighted Hilbert
space of grid functions to a Euclidean space; its adjoint is ``W^-1 A^T``
with ``W`` the (diagonal) Gramian.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .grid import GridSpec, QuadratureWeights, StateField

DEFAULT_DELTA = 1e-5


class BlockId(Enum):
    DIVERGENCE = "div"
    FLUX = "flux"
    MASS = "mass"
    INITIAL = "init"


BLOCK_ORDER = (BlockId.DIVERGENCE, BlockId.FLUX, BlockId.MASS, BlockId.INITIAL)


@dataclass(frozen=True)
class ConstraintBlock:
    block_id: BlockId
    rows: slice
    b: np.ndarray
    delta: float

    @property
    def size(self) -> int:
        return self.rows.stop - self.rows.start


def block_sizes(grid: GridSpec) -> tuple[int, int, int, int]:
    return ((grid.Nx + 1) * grid.Nt, 2 * (grid.Nt + 1), grid.Nt, grid.Nx + 1)


@dataclass(frozen=True)
class ConstraintSystem:
    grid: GridSpec
    weights: QuadratureWeights
    blocks: tuple[ConstraintBlock, ...]
    rho0: np.ndarray
    op: "StencilOperator" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.op is None:
            object.__setattr__(self, "op", StencilOperator(self.grid, self.weights))

    @property
    def n_rows(self) -> int:
        return self.blocks[-1].rows.stop

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([blk.b for blk in self.blocks])

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(blk.delta for blk in self.blocks)

    def block(self, block_id: BlockId) -> ConstraintBlock:
        return self.blocks[BLOCK_ORDER.index(block_id)]


def _targets(grid: GridSpec, q: QuadratureWeights, rho0: np.ndarray) -> list[np.ndarray]:
    n_div, n_flux, _, _ = block_sizes(grid)
    mass0 = float(np.dot(q.wx, rho0))
    return [
        np.zeros(n_div),
        np.zeros(n_flux),
        np.sqrt(q.wt[1:]) * mass0,
        np.sqrt(q.wx) * rho0,
    ]


def _check_profile(grid: GridSpec, rho0) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (grid.Nx + 1,):
        raise ValueError(f"initial profile must have {grid.Nx + 1} entries, got shape {rho0.shape}")
    return rho0


def assemble_constraints(grid: GridSpec, q: QuadratureWeights, rho0, deltas=(DEFAULT_DELTA,) * 4) -> ConstraintSystem:
    rho0 = _check_profile(grid, rho0)
    deltas = tuple(float(d) for d in deltas)
    if len(deltas) != 4 or min(deltas) < 0:
        raise ValueError(f"need four nonnegative tolerances, got {deltas}")
    blocks = []
    start = 0
    for block_id, size, b, delta in zip(BLOCK_ORDER, block_sizes(grid), _targets(grid, q, rho0), deltas):
        blocks.append(ConstraintBlock(block_id, slice(start, start + size), b, delta))
        start += size
    return ConstraintSystem(grid, q, tuple(blocks), rho0.copy())


def update_targets(sys: ConstraintSystem, rho0_new) -> ConstraintSystem:
    """Re-fold the mass and initial-condition targets with a new starting profile."""
    rho0_new = _check_profile(sys.grid, rho0_new)
    targets = _targets(sys.grid, sys.weights, rho0_new)
    blocks = tuple(dataclasses.replace(blk, b=b) for blk, b in zip(sys.blocks, targets))
    return dataclasses.replace(sys, blocks=blocks, rho0=rho0_new.copy())


class StencilOperator:
    """Matrix-free application of ``A`` and ``A^T`` on raw ``(2, Nx+1, Nt+1)`` arrays."""

    def __init__(self, grid: GridSpec, q: QuadratureWeights):
        self.grid = grid
        self.sizes = block_sizes(grid)
        self.offsets = np.cumsum((0,) + self.sizes)
        self.n_rows = int(self.offsets[-1])
        self.sw_div = np.sqrt(np.outer(q.wx, q.wt[1:]))
        self.sw_t = np.sqrt(q.wt)
        self.sw_t_mass = np.sqrt(q.wt[1:])
        self.sw_x = np.sqrt(q.wx)
        self.wx = q.wx
        self.inv_dt = 1.0 / grid.dt
        self.inv_dx = 1.0 / grid.dx

    def apply(self, u: np.ndarray) -> np.ndarray:
        rho, m = u[0], u[1]
        Nx = self.grid.Nx
        mk = m[:, 1:]
        dm = np.empty_like(mk)
        dm[1:Nx] = 0.5 * (mk[2:] - mk[:-2])
        dm[0] = mk[1] - mk[0]
        dm[Nx] = mk[Nx] - mk[Nx - 1]
        div = (rho[:, 1:] - rho[:, :-1]) * self.inv_dt + dm * self.inv_dx
        out = np.empty(self.n_rows)
        o = self.offsets
        out[o[0]:o[1]] = (self.sw_div * div).ravel()
        out[o[1]:o[2]] = np.concatenate([self.sw_t * m[0], self.sw_t * m[Nx]])
        out[o[2]:o[3]] = self.sw_t_mass * (self.wx @ rho[:, 1:])
        out[o[3]:o[4]] = self.sw_x * rho[:, 0]
        return out

    def _coeffs(self):
        return (self.sw_div, self.sw_t, self.sw_t_mass, self.sw_x, self.wx, self.inv_dt, self.inv_dx)

    def apply_into(self, u: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Compiled ``apply`` writing into ``out``."""
        _kernels.apply_A(u, out, *self._coeffs())
        return out

    def apply_T_into(self, psi: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Compiled ``apply_T`` writing into ``out``."""
        _kernels.apply_AT(psi, out, *self._coeffs())
        return out

    def apply_T(self, psi: np.ndarray) -> np.ndarray:
        Nx, Nt = self.grid.Nx, self.grid.Nt
        o = self.offsets
        g = psi[o[0]:o[1]].reshape(Nx + 1, Nt) * self.sw_div
        out = np.zeros((2, Nx + 1, Nt + 1))
        rho, m = out[0], out[1]
        gt = g * self.inv_dt
        rho[:, 1:] += gt
        rho[:, :-1] -= gt
        gx = g * self.inv_dx
        mk = m[:, 1:]
        mk[2:] += 0.5 * gx[1:Nx]
        mk[:-2] -= 0.5 * gx[1:Nx]
        mk[1] += gx[0]
        mk[0] -= gx[0]
        mk[Nx] += gx[Nx]
        mk[Nx - 1] -= gx[Nx]
        flux = psi[o[1]:o[2]]
        m[0] += self.sw_t * flux[: Nt + 1]
        m[Nx] += self.sw_t * flux[Nt + 1:]
        rho[:, 1:] += np.outer(self.wx, self.sw_t_mass * psi[o[2]:o[3]])
        rho[:, 0] += self.sw_x * psi[o[3]:o[4]]
        return out


def apply_A(sys: ConstraintSystem, u: StateField) -> np.ndarray:
    if u.data.shape != (2,) + sys.grid.shape:
        raise ValueError(f"field of shape {u.data.shape} does not match grid {sys.grid.shape}")
    return sys.op.apply(u.data)


def apply_A_adjoint(sys: ConstraintSystem, phi) -> StateField:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (sys.n_rows,):
        raise ValueError(f"dual vector must have {sys.n_rows} entries, got shape {phi.shape}")
    return StateField(sys.op.apply_T(phi) / sys.weights.cell)


def block_residuals(sys: ConstraintSystem, u: StateField) -> dict[BlockId, float]:
    """Euclidean norms ``||A_i u - b_i||_2`` per block."""
    r = apply_A(sys, u)
    return {blk.block_id: float(np.linalg.norm(r[blk.rows] - blk.b)) for blk in sys.blocks}


def project_onto_Cdelta(sys: ConstraintSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = x.copy()
    for blk in sys.blocks:
        d = x[blk.rows] - blk.b
        nrm = np.linalg.norm(d)
        if nrm > blk.delta:
            out[blk.rows] = blk.delta * d / nrm + blk.b
    return out


def prox_conjugate_indicator(sys: ConstraintSystem, phi, sigma: float) -> np.ndarray:
    """Prox of ``sigma * i_delta^*`` through Moreau's identity."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    phi = np.asarray(phi, dtype=float)
    return phi - sigma * project_onto_Cdelta(sys, phi / sigma)


def estimate_operator_norm(sys: ConstraintSystem, iters: int = 500, seed: int = 0, rtol: float = 0.0) -> float:
    """Power iteration for ``||A A^*||_2``.

    The returned Rayleigh-type quotients are nondecreasing in the number of
    iterations because ``A A^*`` is symmetric positive semidefinite.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    op = sys.op
    cell = sys.weights.cell
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(sys.n_rows)
    psi /= np.linalg.norm(psi)
    est = 0.0
    for _ in range(iters):
        y = op.apply(op.apply_T(psi) / cell)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        prev, est = est, max(est, nrm)
        psi = y / nrm
        if rtol > 0 and est - prev <= rtol * est:
            break
    return float(est)


def assemble_matrix(grid: GridSpec, q: QuadratureWeights) -> sp.csr_matrix:
    """Explicit sparse ``A`` built row by row from the difference formulas.

    Columns follow the flattening of a ``(2, Nx+1, Nt+1)`` array. Used only
    as an independent check of the stencil code.
    """
    Nx, Nt = grid.Nx, grid.Nt
    dx, dt = grid.dx, grid.dt
    wx, wt = q.wx, q.wt

    def col(channel, j, k):
        return (channel * (Nx + 1) + j) * (Nt + 1) + k

    rows, cols, vals = [], [], []
    r = 0
    for j in range(Nx + 1):
        for k in range(1, Nt + 1):
            s = np.sqrt(wx[j] * wt[k])
            entries = [(col(0, j, k), 1 / dt), (col(0, j, k - 1), -1 / dt)]
            if j == 0:
                entries += [(col(1, 1, k), 1 / dx), (col(1, 0, k), -1 / dx)]
            elif j == Nx:
                entries += [(col(1, Nx, k), 1 / dx), (col(1, Nx - 1, k), -1 / dx)]
            else:
                entries += [(col(1, j + 1, k), 1 / (2 * dx)), (col(1, j - 1, k), -1 / (2 * dx))]
            for c, v in entries:
                rows.append(r)
                cols.append(c)
                vals.append(s * v)
            r += 1
    for j in (0, Nx):
        for k in range(Nt + 1):
            rows.append(r)
            cols.append(col(1, j, k))
            vals.append(np.sqrt(wt[k]))
            r += 1
    for k in range(1, Nt + 1):
        for j in range(Nx + 1):
            rows.append(r)
            cols.append(col(0, j, k))
            vals.append(np.sqrt(wt[k]) * wx[j])
        r += 1
    for j in range(Nx + 1):
        rows.append(r)
        cols.append(col(0, j, 0))
        vals.append(np.sqrt(wx[j]))
        r += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(r, 2 * (Nx + 1) * (Nt + 1)))
