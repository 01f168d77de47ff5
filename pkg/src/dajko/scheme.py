"""Outer JKO loop: warm-started daJKO steps and the density trajectory."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .action import discrete_action
from .analytic import discrete_mass, scale_to_mass
from .constraints import DEFAULT_DELTA, assemble_constraints, estimate_operator_norm, update_targets
from .energy import EnergyFunctional
from .grid import GridSpec, QuadratureWeights, StateField
from .measurements import NO_DATA, MeasurementSpec, observe
from .solver import SolverParams, dajko_step

log = logging.getLogger(__name__)

__all__ = ["Trajectory", "run_scheme", "scale_to_mass", "total_square_check"]


@dataclass
class Trajectory:
    """Profiles ``rho^(1..N_JKO)`` and per-step diagnostics.

    Per-step lists (``step_actions``, ``converged_flags``, ``iterations``)
    have one entry per solved step, i.e. ``N_JKO - 1``.
    """

    grid: GridSpec
    tau: float
    profiles: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    step_actions: list = field(default_factory=list)
    converged_flags: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    max_negative: float = 0.0
    uses_data: bool = False
    sigma: float | None = None
    operator_norm: float | None = None
    wall_time: float = 0.0
    traces: list = field(default_factory=list)

    @property
    def n_jko(self) -> int:
        return len(self.profiles)

    def masses(self, q: QuadratureWeights) -> list:
        return [discrete_mass(p, q) for p in self.profiles]


def run_scheme(rho0, E: EnergyFunctional, M: MeasurementSpec | None, params: SolverParams, tau: float, n_jko: int,
               grid: GridSpec, q: QuadratureWeights | None = None, deltas=(DEFAULT_DELTA,) * 4,
               callback=None, trace: bool = False) -> Trajectory:
    """Run ``n_jko - 1`` daJKO steps starting from ``rho0``.

    ``callback(n, state, traj)`` is invoked after each step. With ``trace``
    the per-iteration diagnostics of every step are kept in ``traj.traces``
    as rows ``(n, *TRACE_COLUMNS)``.
    """
    q = q or QuadratureWeights.from_grid(grid)
    M = M or NO_DATA
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (grid.Nx + 1,):
        raise ValueError(f"initial profile must have {grid.Nx + 1} entries")
    if (rho0 < 0).any():
        raise ValueError("initial profile must be nonnegative")
    if n_jko < 1:
        raise ValueError("n_jko must be >= 1")
    if M.enabled and len(M.data_sequence) < n_jko - 1:
        raise ValueError(f"data covers {len(M.data_sequence)} steps, need {n_jko - 1}")

    t_start = time.perf_counter()
    sys = assemble_constraints(grid, q, rho0, deltas)
    traj = Trajectory(grid, tau, uses_data=M.enabled)
    traj.profiles.append(rho0.copy())
    traj.energies.append(E.value(rho0, q.wx))
    traj.observations.append(observe(M, rho0, grid, q))
    if n_jko == 1:
        return traj

    # sigma is computed once: update_targets leaves the operator part of A untouched
    norm = estimate_operator_norm(sys, iters=2000, seed=0, rtol=1e-10)
    params = params.resolved(sys, norm)
    traj.sigma, traj.operator_norm = params.sigma, norm

    u = StateField.zeros(grid)
    u.data[0, :, 0] = rho0
    phi = np.zeros(sys.n_rows)
    for n in range(1, n_jko):
        state = dajko_step(u, phi, sys, E, M, M.data_for_step(n), params, tau, q, trace=trace)
        traj.traces.extend((n, *row) for row in state.trace)
        rho_next = state.u.final_slice.copy()
        traj.max_negative = min(traj.max_negative, float(state.u.rho.min()))
        traj.profiles.append(rho_next)
        traj.energies.append(E.value(rho_next, q.wx))
        traj.observations.append(observe(M, rho_next, grid, q))
        traj.step_actions.append(discrete_action(state.u, q, params.fixed_first_momentum))
        traj.converged_flags.append(state.converged)
        traj.iterations.append(state.iter)
        log.info("step %d/%d: %d iterations, converged=%s, energy=%.6g", n, n_jko - 1, state.iter,
                 state.converged, traj.energies[-1])
        if callback is not None:
            callback(n, state, traj)
        sys = update_targets(sys, rho_next)
        u = state.u.copy()
        u.data[0, :, 0] = rho_next
        phi = state.phi
    traj.wall_time = time.perf_counter() - t_start
    return traj


def total_square_check(traj: Trajectory, q: QuadratureWeights | None = None) -> tuple[float, float]:
    """Sum of per-step actions against ``2 tau (F(rho^1) - min_n F(rho^n))``.

    The action carries ``|m|^2 / (2 rho)``, so twice the per-step action is
    the discrete surrogate of ``W_2^2`` between consecutive profiles.
    """
    if traj.uses_data:
        raise ValueError("the total-square estimate only holds for runs without data terms")
    lhs = 2.0 * float(np.sum(traj.step_actions))
    rhs = 2.0 * traj.tau * (traj.energies[0] - min(traj.energies))
    return lhs, rhs
