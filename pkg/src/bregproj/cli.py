"""Command-line scenario runner.

Subcommands:

    bregproj run --config cfg.json [--out DIR] [--max-iter N] [--quiet]
    bregproj check TRACE [--tol 1e-8] [--quiet]
    bregproj project --config cfg.json [--quiet]

Exit codes: 0 converged/ok, 2 diverging, 3 infeasible, 4 max-iterations,
64 usage error, 65 data error (bad config or trace content), 70 internal
numerical failure.  BREGMAN_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import build_scenario, driver_config, load_config
from .driver import run, verify_trace
from .errors import (BregmanError, ConfigError, TraceFormatError, UsageError)
from .legendre import bregman_distance
from .projection import InfeasibilityReport, project_cutset
from .traceio import read_trace, summary_dict, write_summary, write_trace

EXIT_OK = 0
EXIT_DIVERGING = 2
EXIT_INFEASIBLE = 3
EXIT_MAX_ITER = 4
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_SOFTWARE = 70

OUTCOME_EXIT = {
    "converged": EXIT_OK,
    "diverging": EXIT_DIVERGING,
    "infeasible": EXIT_INFEASIBLE,
    "max_iterations": EXIT_MAX_ITER,
}

log = logging.getLogger("bregproj")


def _setup_logging():
    level_name = os.environ.get("BREGMAN_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _emit(quiet, *parts):
    if not quiet:
        print(*parts)


def cmd_run(args) -> int:
    scn = build_scenario(load_config(args.config))
    cfg = driver_config(scn, max_iter=args.max_iter)
    trace = run(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{scn.name}_trace.csv"
    summary_path = out_dir / f"{scn.name}_summary.json"
    write_trace(trace_path, trace)
    write_summary(summary_path, trace)
    summary = summary_dict(trace)
    code = OUTCOME_EXIT[trace.outcome.kind]
    summary["exit_code"] = code
    _emit(args.quiet, json.dumps(summary, indent=2, sort_keys=True))
    _emit(args.quiet, f"trace: {trace_path}")
    return code


def cmd_check(args) -> int:
    f, trace = read_trace(args.trace)
    if not trace.rows and trace.terminal is None:
        _emit(args.quiet, "warning: empty trace, nothing to verify")
        return EXIT_OK
    violations = list(verify_trace(f, trace, tol=args.tol))
    # Cross-check the recorded distance columns against the stored points.
    for r in trace.rows:
        d = bregman_distance(f, r.x, trace.x0)
        if abs(d - r.d_x0) > args.tol * (1.0 + abs(d)):
            violations.append(_column_violation(r.n, d, r.d_x0))
    for v in violations:
        m = "" if v.m is None else f" vs {v.m}"
        _emit(args.quiet, f"violation[{v.check}] at step {v.n}{m}: {v.amount:.3e} {v.detail}")
    if violations:
        _emit(args.quiet, f"{len(violations)} violation(s)")
        return EXIT_DATA
    _emit(args.quiet, "trace ok: 0 violations")
    return EXIT_OK


def _column_violation(n, recomputed, stored):
    from .driver import Violation

    return Violation("column-consistency", n, None, abs(recomputed - stored),
                     f"stored D(x_n,x0)={stored!r}, recomputed {recomputed!r}")


def cmd_project(args) -> int:
    scn = build_scenario(load_config(args.config))
    res = project_cutset(scn.f, scn.cutset, scn.x0, scn.inner)
    if isinstance(res, InfeasibilityReport):
        _emit(args.quiet, json.dumps({
            "status": "infeasible",
            "residual_floor": res.residual_floor,
            "trigger": res.trigger,
            "witness_multipliers": [float(v) for v in res.witness_multipliers],
        }, indent=2, sort_keys=True))
        return EXIT_INFEASIBLE
    _emit(args.quiet, json.dumps({
        "status": "ok",
        "point": [float(c) for c in res.point],
        "multipliers": [float(v) for v in res.multipliers],
        "stationarity_residual": res.stationarity_residual,
        "max_violation": res.max_violation,
        "complementarity_residual": res.complementarity_residual,
        "inner_iterations": res.inner_iterations,
    }, indent=2, sort_keys=True))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bregproj",
        description="Bregman projections onto convex sets by accumulated cuts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write trace + summary")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--out", default=".", help="output directory (default: .)")
    p_run.add_argument("--max-iter", type=int, default=None,
                       help="override the scenario iteration budget")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_check = sub.add_parser("check", help="re-verify a stored trace")
    p_check.add_argument("trace", help="trace CSV written by 'run'")
    p_check.add_argument("--tol", type=float, default=1e-8)
    p_check.add_argument("--quiet", action="store_true")
    p_check.set_defaults(fn=cmd_check)

    p_proj = sub.add_parser("project", help="one-shot projection of x0 onto the base set")
    p_proj.add_argument("--config", required=True, help="scenario JSON file (operator ignored)")
    p_proj.add_argument("--quiet", action="store_true")
    p_proj.set_defaults(fn=cmd_project)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; remap to the documented code.
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BregmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE


if __name__ == "__main__":
    raise SystemExit(main())
