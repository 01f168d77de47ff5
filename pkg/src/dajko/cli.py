"""Command-line entry point: ``solver run | compare | verify``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import PRESET_NAMES, load, preset
from .energy import DomainError
from .experiments import compare, run, verify_metric_mm
from .measurements import ConfigurationError
from .solver import DivergenceError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _steps(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad step list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="solver", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log every JKO step")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a configuration or preset")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="INI configuration file")
    src.add_argument("--preset", help=f"one of: {', '.join(PRESET_NAMES)}")
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--seed", type=int, help="override the configured seed")

    c = sub.add_parser("compare", help="compare a run against another run or the analytic Barenblatt")
    c.add_argument("--a", required=True, help="run directory")
    c.add_argument("--b", required=True, help="run directory or 'analytic'")
    c.add_argument("--steps", type=_steps, default=[1, 2, 4, 8, 16, 32], help="comma-separated 1-based steps")
    c.add_argument("--out", help="output directory (default: the --a directory)")

    v = sub.add_parser("verify", help="randomized minimizing-movement suite")
    v.add_argument("--seed", type=int, default=0)
    return ap


def _report(reports) -> int:
    for rep in reports:
        status = "PASS" if rep.ok else "FAIL"
        print(f"{status} {rep.name}: {rep.passed} passed, {rep.failed} failed (worst {rep.worst:.3e})")
    return EXIT_OK if all(rep.ok for rep in reports) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "verify":
            return _report(verify_metric_mm(args.seed))
        if args.command == "compare":
            paths = compare(args.a, args.b, args.steps, args.out)
            print("\n".join(str(p) for p in paths))
            return EXIT_OK
        cfg = load(args.config) if args.config else preset(args.preset)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if cfg.problem == "metric_mm":
            return _report(verify_metric_mm(cfg.seed))
        traj = run(cfg, args.out)
        n_bad = traj.converged_flags.count(False)
        print(f"{cfg.name}: {traj.n_jko} profiles, {n_bad} unconverged steps, {traj.wall_time:.1f} s")
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, DomainError) as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
