"""Three-operator primal-dual iteration for a single daJKO step."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .action import discrete_action, prox_action_arrays
from .constraints import BLOCK_ORDER, ConstraintSystem, block_residuals, estimate_operator_norm
from .energy import EnergyFunctional
from .grid import QuadratureWeights, StateField
from .measurements import MeasurementSpec, data_misfit_slice

TRACE_COLUMNS = ("iter", "rel_du", "rel_dphi", "rel_dE", "action", "energy",
                 "r_div", "r_flux", "r_mass", "r_init")
_DENOM_FLOOR = 1e-14


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, what: str = "iterate"):
        super().__init__(f"non-finite {what} at primal-dual iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolverParams:
    """Step sizes and stopping rule of the primal-dual iteration.

    ``sigma=None`` (or ``auto_sigma=True``) selects ``sigma = 0.9 / (lam ||AA*||)``
    once the constraint system is known. ``implicit_internal`` moves the
    internal energy ``U`` of the final slice from the gradient step into the
    pointwise prox, which keeps the iteration stable for ``U = rho log rho``
    whose gradient is not Lipschitz near zero density. Besides the relative-change test,
    convergence requires every block residual to lie within
    ``max(delta_i, feasibility_slack * tol * ||b||_2)``; ``None`` disables
    that gate and leaves only the relative-change test.
    """

    lam: float = 0.2
    sigma: float | None = None
    it_max: int = 200_000
    tol: float = 1e-5
    warmup: int = 10
    auto_sigma: bool = False
    fixed_first_momentum: bool = True
    first_momentum_value: float = 0.0
    check_positivity: bool = False
    feasibility_slack: float | None = 10.0
    implicit_internal: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if int(self.it_max) != self.it_max or self.it_max < 1:
            raise ValueError(f"it_max must be a positive integer, got {self.it_max}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.sigma is None:
            self.auto_sigma = True

    def resolved(self, sys: ConstraintSystem, norm_estimate: float | None = None) -> "SolverParams":
        """Copy with sigma filled in and the step-size condition validated."""
        norm = norm_estimate if norm_estimate is not None else estimate_operator_norm(sys, iters=2000, seed=0,
                                                                                        rtol=1e-10)
        sigma = auto_step_sizes(sys, self.lam, norm) if self.auto_sigma else self.sigma
        if self.lam * sigma * norm >= 1.0:
            raise ValueError(f"step sizes violate lam*sigma*||AA*|| < 1 ({self.lam * sigma * norm:.4g})")
        out = SolverParams(**{**self.__dict__, "sigma": sigma, "auto_sigma": False})
        return out


def auto_step_sizes(sys: ConstraintSystem, lam: float, norm_estimate: float | None = None,
                    product: float = 0.9) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    norm = estimate_operator_norm(sys, iters=2000, seed=0, rtol=1e-10) if norm_estimate is None else norm_estimate
    if not norm > 0:
        raise RuntimeError(f"operator norm estimate must be positive, got {norm}")
    return product / (lam * norm)


@dataclass
class SolverState:
    u: StateField
    phi: np.ndarray
    u_bar: StateField
    iter: int = 0
    converged: bool = False
    energy_trace: list = field(default_factory=list)
    trace: list = field(default_factory=list)


class _Objective:
    """tau-scaled combined energy of the final slice and its weighted gradient."""

    def __init__(self, E: EnergyFunctional, M: MeasurementSpec, v, tau: float, x, wx, wt_last,
                 explicit_internal: bool = True):
        self.E, self.M, self.v, self.tau = E, M, v, tau
        self.x, self.wx, self.wt_last = x, wx, wt_last
        self.explicit_internal = explicit_internal

    def energy(self, rho1) -> float:
        val = self.E.value(rho1, self.wx)
        if self.M.enabled:
            val += data_misfit_slice(self.M, self.v, rho1, self.x, self.wx)[0]
        return val

    def grad_slice(self, rho1) -> np.ndarray:
        g = self.E.slice_gradient(rho1, self.wx, internal=self.explicit_internal)
        if self.M.enabled:
            g = g + data_misfit_slice(self.M, self.v, rho1, self.x, self.wx)[1]
        return (self.tau / self.wt_last) * g


def _rel(num: float, den: float) -> float:
    return num / den if den >= _DENOM_FLOOR else num


def dajko_step(u0: StateField, phi0, sys: ConstraintSystem, E: EnergyFunctional, M: MeasurementSpec, v_next,
               params: SolverParams, tau: float, q: QuadratureWeights, trace: bool = False) -> SolverState:
    """Run the primal-dual iteration for one step from ``(u0, phi0)``.

    ``params.sigma`` must be resolved (see :meth:`SolverParams.resolved`).
    Reaching ``it_max`` returns a state with ``converged=False``.
    """
    if params.sigma is None:
        raise ValueError("sigma is unresolved; call params.resolved(sys) first")
    if not tau > 0:
        raise ValueError("tau must be positive")
    op = sys.op
    grid = sys.grid
    lam, sigma, tol = params.lam, params.sigma, params.tol
    cell = q.cell
    lam_inv_cell = lam / cell
    implicit = params.implicit_internal and E.U is not None
    if implicit:
        kinds = {"entropy": _kernels.INTERNAL_ENTROPY, "power": _kernels.INTERNAL_POWER}
        if E.internal_kind not in kinds:
            raise ValueError(f"{E.name}: implicit internal energy needs internal_kind 'entropy' or 'power'")
        kind, mexp = kinds[E.internal_kind], float(E.internal_exponent)
        kappa = lam * tau / q.wt[-1]
    obj = _Objective(E, M, v_next, tau, grid.x, q.wx, q.wt[-1], explicit_internal=not implicit)
    offsets = np.array([blk.rows.start for blk in sys.blocks] + [sys.n_rows], dtype=np.int64)
    b_all = sys.b
    deltas = np.array(sys.deltas)
    fixed = params.fixed_first_momentum
    feas = params.feasibility_slack
    if feas is not None:
        limits = np.maximum(deltas, feas * tol * float(np.linalg.norm(b_all)))

    u = np.array(u0.data, dtype=float)
    if fixed:
        u[1, :, 0] = params.first_momentum_value
    phi = np.array(phi0, dtype=float)
    if phi.shape != (sys.n_rows,):
        raise ValueError(f"dual vector must have {sys.n_rows} entries")
    u_bar = u.copy()
    u_new = np.empty_like(u)
    z = np.empty_like(u)
    Au = np.empty(sys.n_rows)
    phi_new = np.empty_like(phi)
    res = np.empty(len(sys.blocks))
    g_old = obj.grad_slice(u[0, :, -1])
    e_old = obj.energy(u[0, :, -1])
    state = SolverState(StateField(u), phi, StateField(u_bar), energy_trace=[e_old])
    norm_u = math.sqrt(_kernels.weighted_sq(u, cell))
    norm_phi = float(np.linalg.norm(phi))

    it = 0
    for it in range(1, int(params.it_max) + 1):
        # dual: prox of sigma * i_delta^* via Moreau
        op.apply_into(u_bar, Au)
        _kernels.dual_update(phi, Au, sigma, b_all, offsets, deltas, phi_new)

        # primal: prox of lam * action after gradient and adjoint steps
        op.apply_T_into(phi_new, z)
        np.multiply(z, lam_inv_cell, out=z)
        np.subtract(u, z, out=z)
        z[0, :, -1] -= lam * g_old
        if fixed:
            z[1, :, 0] = 0.0
        _kernels.prox_sweep(z, u_new, lam)
        if implicit:
            _kernels.internal_prox_slice(z, u_new, grid.Nt, lam, kappa, kind, mexp)
        if fixed:
            u_new[1, :, 0] = params.first_momentum_value
        if params.check_positivity and not (u_new[0] >= 0).all():
            raise AssertionError(f"negative density after prox at iteration {it}")

        g_new = obj.grad_slice(u_new[0, :, -1])
        e_new = obj.energy(u_new[0, :, -1])
        if not (math.isfinite(e_new) and np.isfinite(phi_new).all() and np.isfinite(u_new).all()):
            raise DivergenceError(it)

        rel_du = _rel(math.sqrt(_kernels.weighted_sq_diff(u_new, u, cell)), norm_u)
        rel_dphi = _rel(float(np.linalg.norm(phi_new - phi)), norm_phi)
        rel_dE = _rel(abs(e_new - e_old), abs(e_old))

        np.multiply(u_new, 2.0, out=u_bar)
        u_bar -= u
        u_bar[0, :, -1] += lam * (g_old - g_new)

        u, u_new = u_new, u
        phi, phi_new = phi_new, phi
        g_old, e_old = g_new, e_new
        norm_u = math.sqrt(_kernels.weighted_sq(u, cell))
        norm_phi = float(np.linalg.norm(phi))
        state.energy_trace.append(e_new)
        if trace:
            r = block_residuals(sys, StateField(u))
            state.trace.append((it, rel_du, rel_dphi, rel_dE,
                                discrete_action(StateField(u), q, fixed), e_new,
                                *(r[bid] for bid in BLOCK_ORDER)))
        if it > params.warmup and max(rel_du, rel_dphi, rel_dE) < tol:
            if feas is None:
                state.converged = True
                break
            op.apply_into(u, Au)
            _kernels.block_residual_norms(Au, b_all, offsets, res)
            if (res <= limits).all():
                state.converged = True
                break

    state.u = StateField(u)
    state.phi = phi
    state.u_bar = StateField(u_bar)
    state.iter = it
    return state


def step_objective(u: StateField, E: EnergyFunctional, M: MeasurementSpec, v, tau: float, q: QuadratureWeights,
                   grid, fixed_first_momentum: bool = True) -> float:
    """Discrete action plus ``tau`` times the combined energy of the final slice."""
    obj = _Objective(E, M, v, tau, grid.x, q.wx, q.wt[-1])
    return discrete_action(u, q, fixed_first_momentum) + tau * obj.energy(u.final_slice)
