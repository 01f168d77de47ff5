"""Turn a RunConfig into a solved trajectory and emitted files."""

from __future__ import annotations

import dataclasses
import json
import logging
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import BarenblattParams, barenblatt, barenblatt_mass, gaussian_two_bump, scale_to_mass, \
    shifted_barenblatt_profile
from .config import RunConfig, parse, serialize
from .energy import ZERO_ENERGY, ChemoParams, EnergyFunctional, PMEParams, chemo_energy, pme_energy
from .grid import GridSpec, QuadratureWeights
from .measurements import ConfigurationError, MeasurementSpec, add_noise, make_data_sequence, observe
from .metric_mm import implicit_euler_suite, nudging_suite, stability_suite
from .output import atomic_write, comparison_tables, read_data_csv, read_profiles, write_json, write_trajectory
from .scheme import Trajectory, run_scheme
from .solver import SolverParams

log = logging.getLogger(__name__)


@dataclass
class Problem:
    grid: GridSpec
    q: QuadratureWeights
    rho0: np.ndarray
    energy: EnergyFunctional
    measurements: MeasurementSpec
    params: SolverParams


def grid_of(c: RunConfig) -> GridSpec:
    return GridSpec(c.L, c.R, c.Nx, c.Nt)


def barenblatt_params(c: RunConfig, m: float | None = None) -> BarenblattParams:
    return BarenblattParams(m=c.m if m is None else m, C=c.barenblatt_C, t0=c.barenblatt_t0)


def reference_exponent(c: RunConfig) -> float:
    """Exponent of the analytic truth: the data-generating one when data or a mass target is involved."""
    return c.truth_m if (c.uses_data or c.scale_to_truth_mass) else c.m


def initial_profile(c: RunConfig, grid: GridSpec, q: QuadratureWeights) -> np.ndarray:
    if c.kind == "barenblatt":
        rho0 = shifted_barenblatt_profile(grid, barenblatt_params(c), c.x_shift, c.t_shift)
        if c.scale_to_truth_mass:
            rho0 = scale_to_mass(rho0, barenblatt_mass(barenblatt_params(c, c.truth_m), grid, q), q)
        return rho0
    if c.kind == "gaussian_two_bump":
        return gaussian_two_bump(grid, c.eta)
    # either a run's profiles.csv (first profile) or one value per line
    if c.file.endswith("profiles.csv"):
        rho0 = read_profiles(c.file)[1][0]
    else:
        rho0 = np.loadtxt(c.file, delimiter=",", ndmin=1)
    if rho0.shape != (grid.Nx + 1,):
        raise ConfigurationError(f"file: initial profile has {rho0.size} values, grid needs {grid.Nx + 1}")
    return rho0


def energy_of(c: RunConfig, grid: GridSpec) -> EnergyFunctional:
    if c.problem == "pme":
        return pme_energy(PMEParams(c.m), grid)
    if c.problem == "chemotaxis":
        return chemo_energy(ChemoParams(c.chi, c.kernel_dim), grid)
    return ZERO_ENERGY


def solver_params(c: RunConfig, check_positivity: bool = False) -> SolverParams:
    return SolverParams(lam=c.lam, sigma=c.sigma, it_max=c.it_max, tol=c.tol, first_momentum_value=c.first_momentum,
                        feasibility_slack=c.feasibility_slack, implicit_internal=c.implicit_internal,
                        check_positivity=check_positivity)


def truth_config(c: RunConfig) -> RunConfig:
    """The unperturbed, data-free model whose observations feed ``c``."""
    return c.replace(name=f"{c.name}-truth", m=c.truth_m, chi=c.truth_chi, x_shift=0.0, t_shift=0.0,
                     scale_to_truth_mass=False, use_expectation=False, use_variance=False, source="none",
                     noise_sigma=0.0, out_dir="", trace=False)


def observations_from(traj: Trajectory, M: MeasurementSpec, q: QuadratureWeights, n_jko: int) -> list:
    if traj.n_jko < n_jko:
        raise ConfigurationError(f"truth run has {traj.n_jko} profiles, need {n_jko}")
    return [observe(M, traj.profiles[n], traj.grid, q) for n in range(1, n_jko)]


def data_sequence(c: RunConfig, grid: GridSpec, q: QuadratureWeights, truth: Trajectory | None = None,
                  check_positivity: bool = False) -> list:
    M = MeasurementSpec(c.use_expectation, c.use_variance)
    if c.source == "analytic":
        p = barenblatt_params(c, c.truth_m)
        data = make_data_sequence(lambda t: barenblatt(grid.x, t, p), c.tau, c.n_jko, grid, q,
                                  c.use_expectation, c.use_variance)
    elif c.source == "simulate":
        if truth is None:
            log.info("running the truth model for %s", c.name)
            truth = solve(truth_config(c), check_positivity=check_positivity)
        data = observations_from(truth, M, q, c.n_jko)
    elif c.source == "file":
        data = read_data_csv(c.data_file, M.n_obs, c.n_jko - 1)
    else:
        return []
    if c.noise_sigma > 0:
        data = add_noise(data, c.noise_sigma, c.seed)
    return data


def build(c: RunConfig, truth: Trajectory | None = None, check_positivity: bool = False) -> Problem:
    if c.problem == "metric_mm":
        raise ConfigurationError("problem: metric_mm has no PDE to build")
    grid = grid_of(c)
    q = QuadratureWeights.from_grid(grid)
    M = MeasurementSpec(c.use_expectation, c.use_variance, c.theta,
                        data_sequence(c, grid, q, truth, check_positivity) if c.uses_data else [])
    return Problem(grid, q, initial_profile(c, grid, q), energy_of(c, grid), M, solver_params(c, check_positivity))


def solve(c: RunConfig, truth: Trajectory | None = None, check_positivity: bool = False,
          callback=None) -> Trajectory:
    p = build(c, truth, check_positivity)
    return run_scheme(p.rho0, p.energy, p.measurements, p.params, c.tau, c.n_jko, p.grid, p.q,
                      deltas=c.deltas, callback=callback, trace=c.trace)


def manifest(c: RunConfig, traj: Trajectory, files: dict) -> dict:
    return {
        "name": c.name,
        "version": __version__,
        "config": dataclasses.asdict(c) | {"deltas": list(c.deltas)},
        "config_text": serialize(c),
        "seed": c.seed,
        "resolved": {"sigma": traj.sigma, "operator_norm": traj.operator_norm,
                     "lambda_sigma_norm": None if traj.sigma is None else c.lam * traj.sigma * traj.operator_norm},
        "wall_time_s": traj.wall_time,
        "converged": traj.converged_flags,
        "iterations": traj.iterations,
        "n_profiles": traj.n_jko,
        "min_density": traj.max_negative,
        "files": files,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }


def run(c: RunConfig, out_dir=None, truth: Trajectory | None = None, check_positivity: bool = False) -> Trajectory:
    """Solve ``c`` and write profiles, summary (and trace) CSVs plus ``manifest.json``."""
    out = Path(out_dir or c.out_dir or f"runs/{c.name}")
    traj = solve(c, truth, check_positivity)
    q = QuadratureWeights.from_grid(traj.grid)
    files = write_trajectory(traj, q, out)
    atomic_write(out / "config.ini", serialize(c))
    files["config"] = "config.ini"
    write_json(out / "manifest.json", manifest(c, traj, files))
    return traj


def verify_metric_mm(seed: int = 0) -> list:
    return [stability_suite(1000, seed), implicit_euler_suite(100, seed + 1), nudging_suite(100, seed + 2)]


def load_run(run_dir) -> tuple[RunConfig, np.ndarray, np.ndarray]:
    run_dir = Path(run_dir)
    cfg_path = run_dir / "config.ini"
    if not cfg_path.is_file():
        raise ConfigurationError(f"{str(run_dir)!r} is not a run directory (config.ini missing)")
    c = parse(cfg_path.read_text(encoding="utf-8"))
    x, prof = read_profiles(run_dir / "profiles.csv")
    return c, x, prof


def analytic_profiles(c: RunConfig, n: int) -> np.ndarray:
    grid = grid_of(c)
    p = barenblatt_params(c, reference_exponent(c))
    return np.array([barenblatt(grid.x, k * c.tau, p) for k in range(n)])


def compare(run_a, run_b, steps, out_dir=None) -> tuple[Path, Path]:
    """Write ``comparison.csv`` and ``comparison_metrics.csv`` for ``run_a`` against a run or ``analytic``."""
    c, x, num = load_run(run_a)
    if str(run_b) == "analytic":
        if c.problem != "pme":
            raise ConfigurationError("compare: analytic reference exists only for pme runs")
        ref = analytic_profiles(c, num.shape[0])
    else:
        cb, xb, ref = load_run(run_b)
        if xb.shape != x.shape or not np.allclose(xb, x, rtol=0, atol=1e-12):
            raise ConfigurationError("compare: runs use different grids")
    n = min(num.shape[0], ref.shape[0])
    bad = [k for k in steps if not 1 <= k <= n]
    if bad:
        raise ConfigurationError(f"steps: indices {bad} outside 1..{n}")
    q = QuadratureWeights.from_grid(grid_of(c))
    long_csv, metrics_csv = comparison_tables(x, q.wx, num, ref, steps)
    out = Path(out_dir or run_a)
    atomic_write(out / "comparison.csv", long_csv)
    atomic_write(out / "comparison_metrics.csv", metrics_csv)
    return out / "comparison.csv", out / "comparison_metrics.csv"


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest.json").read_text(encoding="utf-8"))
