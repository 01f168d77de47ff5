"""CSV/JSON emitters and readers for trajectories and comparisons."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import QuadratureWeights
from .measurements import ConfigurationError, observe_expectation, observe_variance
from .solver import TRACE_COLUMNS

PROFILE_COLUMNS = ("n", "j", "x_j", "rho")
SUMMARY_COLUMNS = ("n", "energy", "action", "converged", "B1", "B2", "mass")
COMPARISON_COLUMNS = ("k", "j", "x_j", "rho_numeric", "rho_reference", "abs_err")
METRIC_COLUMNS = ("k", "L1_err", "Linf_err", "B1_num", "B1_ref", "B2_num", "B2_ref", "max_num", "max_ref")


def fmt(value) -> str:
    """17 significant digits for floats so that output files diff cleanly."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return f"{float(value):.17g}"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def profile_rows(traj):
    x = traj.grid.x
    for n, rho in enumerate(traj.profiles, start=1):
        for j, (xj, r) in enumerate(zip(x, rho), start=1):
            yield n, j, xj, r


def summary_rows(traj, q: QuadratureWeights):
    g = traj.grid
    for n, rho in enumerate(traj.profiles, start=1):
        action = traj.step_actions[n - 2] if n > 1 else None
        conv = traj.converged_flags[n - 2] if n > 1 else None
        yield (n, traj.energies[n - 1], action, conv, observe_expectation(rho, g, q), observe_variance(rho, g, q),
               float(q.wx @ rho))


def write_trajectory(traj, q: QuadratureWeights, out_dir) -> dict:
    out_dir = Path(out_dir)
    files = {"profiles": out_dir / "profiles.csv", "summary": out_dir / "summary.csv"}
    atomic_write(files["profiles"], csv_text(PROFILE_COLUMNS, profile_rows(traj)))
    atomic_write(files["summary"], csv_text(SUMMARY_COLUMNS, summary_rows(traj, q)))
    if traj.traces:
        files["trace"] = out_dir / "trace.csv"
        atomic_write(files["trace"], csv_text(("n",) + TRACE_COLUMNS, traj.traces))
    return {k: v.name for k, v in files.items()}


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def read_profiles(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, profiles)`` with ``profiles[n - 1, j - 1] = rho``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"profiles file {str(path)!r} not found")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = data[:, 0].astype(int)
    j = data[:, 1].astype(int)
    out = np.zeros((n.max(), j.max()))
    out[n - 1, j - 1] = data[:, 3]
    x = np.zeros(j.max())
    x[j - 1] = data[:, 2]
    return x, out


def read_data_csv(path, n_obs: int, n_steps: int) -> list:
    """Observation file with columns ``n, v1[, v2]`` covering steps ``1 .. n_steps``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"data file {str(path)!r} not found")
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not rows[0][0].strip().lstrip("-").replace(".", "", 1).isdigit():
        rows = rows[1:]
    table = {}
    for row in rows:
        if not row:
            continue
        if len(row) - 1 < n_obs:
            raise ConfigurationError(f"data row {row!r} has fewer than {n_obs} values")
        try:
            table[int(row[0])] = np.array([float(v) for v in row[1:1 + n_obs]])
        except ValueError:
            raise ConfigurationError(f"bad data row {row!r}") from None
    missing = [n for n in range(1, n_steps + 1) if n not in table]
    if missing:
        raise ConfigurationError(f"data file lacks steps {missing[:5]}")
    return [table[n] for n in range(1, n_steps + 1)]


def comparison_tables(x, wx, num: np.ndarray, ref: np.ndarray, steps) -> tuple[str, str]:
    """Long-format comparison CSV and scalar metrics CSV at 1-based ``steps``."""
    long_rows, metric_rows = [], []
    for k in steps:
        a, b = num[k - 1], ref[k - 1]
        err = np.abs(a - b)
        long_rows.extend((k, j, xj, ra, rb, e) for j, (xj, ra, rb, e) in enumerate(zip(x, a, b, err), start=1))
        b1a, b1b = float(wx @ (x * a)), float(wx @ (x * b))
        b2a = float(wx @ ((x - b1a) ** 2 * a))
        b2b = float(wx @ ((x - b1b) ** 2 * b))
        metric_rows.append((k, float(wx @ err), float(err.max()), b1a, b1b, b2a, b2b, float(a.max()), float(b.max())))
    return csv_text(COMPARISON_COLUMNS, long_rows), csv_text(METRIC_COLUMNS, metric_rows)
