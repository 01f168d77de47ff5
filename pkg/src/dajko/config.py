"""Run configuration: INI schema, parsing, serialization and presets.

Schema (section / key, default)::

    [run]           name, problem = pme | chemotaxis | custom | metric_mm, seed = 0
    [grid]          L = -1, R = 1, Nx = 100, Nt = 10
    [time]          tau = 5e-4, n_jko = 33
    [solver]        lam = 0.2, sigma = auto, it_max = 200000, tol = 1e-5,
                    deltas = 1e-5, 1e-5, 1e-5, 1e-5, feasibility_slack = 10 | none,
                    first_momentum = 0, implicit_internal = false
    [energy]        m = 2, chi = 2, kernel_dim = 1
    [initial]       kind = barenblatt | gaussian_two_bump | file, x_shift = 0,
                    t_shift = 0, barenblatt_C, barenblatt_t0,
                    scale_to_truth_mass = false, eta = 0.2, file
    [measurements]  use_expectation = false, use_variance = false, theta = inf,
                    source = none | analytic | simulate | file, truth_m = 2,
                    truth_chi = 2, data_file, noise_sigma = 0
    [output]        out_dir, trace = false

``problem = custom`` runs with zero energy (pure optimal transport between
the constraint targets). ``problem = metric_mm`` runs the randomized
minimizing-movement suite and ignores the other sections.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .measurements import ConfigurationError

PROBLEMS = ("pme", "chemotaxis", "custom", "metric_mm")
IC_KINDS = ("barenblatt", "gaussian_two_bump", "file")
DATA_SOURCES = ("none", "analytic", "simulate", "file")


def _opt(section: str, **kw):
    return field(metadata={"section": section}, **kw)


@dataclass(frozen=True)
class RunConfig:
    name: str = _opt("run", default="custom-run")
    problem: str = _opt("run", default="pme")
    seed: int = _opt("run", default=0)

    L: float = _opt("grid", default=-1.0)
    R: float = _opt("grid", default=1.0)
    Nx: int = _opt("grid", default=100)
    Nt: int = _opt("grid", default=10)

    tau: float = _opt("time", default=5e-4)
    n_jko: int = _opt("time", default=33)

    lam: float = _opt("solver", default=0.2)
    sigma: float | None = _opt("solver", default=None)
    it_max: int = _opt("solver", default=200_000)
    tol: float = _opt("solver", default=1e-5)
    deltas: tuple = _opt("solver", default=(1e-5, 1e-5, 1e-5, 1e-5))
    feasibility_slack: float | None = _opt("solver", default=10.0)
    first_momentum: float = _opt("solver", default=0.0)
    implicit_internal: bool = _opt("solver", default=False)

    m: float = _opt("energy", default=2.0)
    chi: float = _opt("energy", default=2.0)
    kernel_dim: int = _opt("energy", default=1)

    kind: str = _opt("initial", default="barenblatt")
    x_shift: float = _opt("initial", default=0.0)
    t_shift: float = _opt("initial", default=0.0)
    barenblatt_C: float = _opt("initial", default=(3.0 / 16.0) ** (1.0 / 3.0))
    barenblatt_t0: float = _opt("initial", default=1e-3)
    scale_to_truth_mass: bool = _opt("initial", default=False)
    eta: float = _opt("initial", default=0.2)
    file: str = _opt("initial", default="")

    use_expectation: bool = _opt("measurements", default=False)
    use_variance: bool = _opt("measurements", default=False)
    theta: float = _opt("measurements", default=math.inf)
    source: str = _opt("measurements", default="none")
    truth_m: float = _opt("measurements", default=2.0)
    truth_chi: float = _opt("measurements", default=2.0)
    data_file: str = _opt("measurements", default="")
    noise_sigma: float = _opt("measurements", default=0.0)

    out_dir: str = _opt("output", default="")
    trace: bool = _opt("output", default=False)

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def uses_data(self) -> bool:
        return self.use_expectation or self.use_variance


SECTIONS = ("run", "grid", "time", "solver", "energy", "initial", "measurements", "output")


def _fail(key: str, msg: str):
    raise ConfigurationError(f"{key}: {msg}")


def validate(c: RunConfig) -> None:
    if c.problem not in PROBLEMS:
        _fail("problem", f"must be one of {', '.join(PROBLEMS)}, got {c.problem!r}")
    if c.problem == "metric_mm":
        return
    if not c.R > c.L:
        _fail("R", "domain must satisfy L < R")
    if c.Nx < 2:
        _fail("Nx", f"must be >= 2, got {c.Nx}")
    if c.Nt < 1:
        _fail("Nt", f"must be >= 1, got {c.Nt}")
    for key in ("tau", "lam", "tol", "eta", "barenblatt_C", "barenblatt_t0", "theta"):
        if not getattr(c, key) > 0:
            _fail(key, f"must be positive, got {getattr(c, key)}")
    if c.sigma is not None and not c.sigma > 0:
        _fail("sigma", f"must be positive or auto, got {c.sigma}")
    if c.n_jko < 1:
        _fail("n_jko", f"must be >= 1, got {c.n_jko}")
    if c.it_max < 1:
        _fail("it_max", f"must be >= 1, got {c.it_max}")
    if len(c.deltas) != 4 or not all(d > 0 for d in c.deltas):
        _fail("deltas", "needs four positive tolerances")
    if c.feasibility_slack is not None and not c.feasibility_slack > 0:
        _fail("feasibility_slack", "must be positive or none")
    if c.problem == "pme" and not c.m >= 1:
        _fail("m", f"must be >= 1, got {c.m}")
    if c.kind not in IC_KINDS:
        _fail("kind", f"must be one of {', '.join(IC_KINDS)}, got {c.kind!r}")
    if c.kind == "barenblatt" and not c.m > 1:
        _fail("m", "a Barenblatt initial condition needs m > 1")
    if c.kind == "file" and not Path(c.file).is_file():
        _fail("file", f"initial-condition file {c.file!r} not found")
    if c.kind != "barenblatt" and c.scale_to_truth_mass:
        _fail("scale_to_truth_mass", "only applies to Barenblatt initial conditions")
    if c.source not in DATA_SOURCES:
        _fail("source", f"must be one of {', '.join(DATA_SOURCES)}, got {c.source!r}")
    if c.uses_data and c.source == "none":
        _fail("source", "observations are enabled but no data source is set")
    if c.source == "analytic" and c.problem != "pme":
        _fail("source", "analytic data is only available for pme")
    if c.source == "file" and not Path(c.data_file).is_file():
        _fail("data_file", f"data file {c.data_file!r} not found")
    if c.noise_sigma < 0:
        _fail("noise_sigma", "must be nonnegative")
    if c.scale_to_truth_mass and not c.truth_m > 1:
        _fail("truth_m", "must exceed 1 for the mass target")


# ---- text (de)serialization ----

def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(f: dataclasses.Field, raw: str):
    raw = raw.strip()
    name = f.name
    try:
        if name == "sigma":
            return None if raw.lower() == "auto" else float(raw)
        if name == "feasibility_slack":
            return None if raw.lower() == "none" else float(raw)
        if name == "deltas":
            parts = [float(p) for p in raw.split(",")]
            return tuple(parts * 4 if len(parts) == 1 else parts)
        typ = f.type
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "1", "yes")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def serialize(c: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec in SECTIONS:
        parser.add_section(sec)
    for f in fields(c):
        val = getattr(c, f.name)
        if f.name == "feasibility_slack" and val is None:
            text = "none"
        else:
            text = _fmt(val)
        parser.set(f.metadata["section"], f.name, text)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse(text: str) -> RunConfig:
    """Parse INI text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    by_key = {(f.metadata["section"], f.name): f for f in fields(RunConfig)}
    kwargs = {}
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigurationError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            f = by_key.get((sec, key))
            if f is None:
                raise ConfigurationError(f"unknown key {key!r} in section [{sec}]")
            kwargs[key] = _parse_value(f, raw)
    return RunConfig(**kwargs)


def load(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {str(path)!r} not found")
    return parse(path.read_text(encoding="utf-8"))


# ---- presets ----

_PME_SHIFT = dict(x_shift=0.1, use_expectation=True, theta=1 / 200, source="analytic", truth_m=2.0)


def _presets() -> dict:
    tau = 5e-4
    chemo = dict(problem="chemotaxis", kind="gaussian_two_bump", eta=0.2, tau=1e-3, n_jko=101,
                 implicit_internal=True)
    return {
        "pme-baseline": dict(),
        "pme-shift-x": dict(_PME_SHIFT),
        "pme-shift-xt": dict(_PME_SHIFT, t_shift=6 * tau),
        "pme-shift-xt-var": dict(_PME_SHIFT, t_shift=6 * tau, use_variance=True),
        "pme-wrong-m": dict(_PME_SHIFT, t_shift=6 * tau, use_variance=True, m=2.5, theta=1 / 400),
        "pme-wrong-m-massfix": dict(_PME_SHIFT, t_shift=6 * tau, use_variance=True, m=2.5, theta=1 / 400,
                                    scale_to_truth_mass=True),
        "chemo-truth": dict(chemo, chi=2.0),
        "chemo-blowup": dict(chemo, chi=10.0),
        "chemo-da": dict(chemo, chi=10.0, use_expectation=True, use_variance=True, theta=1 / 400,
                         source="simulate", truth_chi=2.0),
        "verify-metric-mm": dict(problem="metric_mm"),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> RunConfig:
    table = _presets()
    if name not in table:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(table)}")
    return RunConfig(name=name, **table[name])
