"""Trace files: CSV with a commented metadata header, plus JSON summaries.

Layout (one file per run):

    # bregproj-trace v1
    # name=halving
    # legendre=energy
    # dim=1
    # x0=1
    # c0={"halfspaces": []}
    # outcome=converged
    n,Dxn_x0,Dstep,cum,inner_sweeps,status,x_0,y_0
    0,0,0.125,0.125,1,ok,1,0
    ...

Floats are serialized with 17 significant digits so that re-parsing
reproduces them bit for bit; the checker rebuilds every cut from the stored
(x, y) pairs rather than trusting any recorded geometry.  The final row
carries the terminal point with empty y/Dstep cells and the outcome in its
status column.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .driver import IterationTrace, Terminal, TraceRow
from .errors import TraceFormatError
from .legendre import make_legendre
from .sets import Halfspace, build_cut

FORMAT_TAG = "bregproj-trace v1"


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _coords(x, dim):
    if x is None:
        return [""] * dim
    return [_fmt(c) for c in x]


def write_trace(path, trace: IterationTrace) -> None:
    dim = trace.x0.size
    meta = {
        "name": trace.name,
        "legendre": trace.legendre_name,
        "dim": str(dim),
        "x0": " ".join(_fmt(c) for c in trace.x0),
        "c0": json.dumps(
            {"halfspaces": [{"a": list(h.a), "b": h.b} for h in trace.base]}
        ),
        "outcome": trace.outcome.kind if trace.outcome else "unknown",
    }
    store_points = all(r.x is not None for r in trace.rows)
    header = ["n", "Dxn_x0", "Dstep", "cum", "inner_sweeps", "status"]
    if store_points:
        header += [f"x_{i}" for i in range(dim)] + [f"y_{i}" for i in range(dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {FORMAT_TAG}\n")
        for key, val in meta.items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in trace.rows:
            row = [str(r.n), _fmt(r.d_x0), _fmt(r.d_step), _fmt(r.cum),
                   str(r.inner_sweeps), r.status]
            if store_points:
                row += _coords(r.x, dim) + _coords(r.y, dim)
            writer.writerow(row)
        if trace.terminal is not None:
            t = trace.terminal
            row = [str(t.n), _fmt(t.d_x0), "", "", "", t.status]
            if store_points:
                row += _coords(t.x, dim) + [""] * dim
            writer.writerow(row)


def _parse_float(cell, where):
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise TraceFormatError(f"{where}: not a number: {cell!r}") from None


def read_trace(path):
    """Parse a trace file; returns (kernel, IterationTrace).

    Cuts are rebuilt from the stored (x, y) pairs.  Raises TraceFormatError
    on malformed files, including traces stored without coordinates.
    """
    meta = {}
    data_lines = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise TraceFormatError(f"trace file not found: {path}") from None
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                meta[key.strip()] = val
        elif line.strip():
            data_lines.append(line)
    if not data_lines:
        raise TraceFormatError(f"{path}: no header row")
    for key in ("legendre", "dim", "x0"):
        if key not in meta:
            raise TraceFormatError(f"{path}: missing metadata line '# {key}=...'")
    try:
        dim = int(meta["dim"])
        x0 = np.array([float(tok) for tok in meta["x0"].split()])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: bad metadata: {exc}") from None
    if x0.size != dim:
        raise TraceFormatError(f"{path}: x0 has {x0.size} entries, dim says {dim}")
    try:
        f = make_legendre(meta["legendre"], dim)
    except Exception as exc:
        raise TraceFormatError(f"{path}: {exc}") from None
    base = []
    if "c0" in meta:
        try:
            c0 = json.loads(meta["c0"])
            for row in c0.get("halfspaces", []):
                base.append(Halfspace(np.asarray(row["a"], dtype=float), float(row["b"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"{path}: bad c0 metadata: {exc}") from None

    reader = csv.reader(data_lines)
    header = next(reader)
    required = ["n", "Dxn_x0", "Dstep", "cum", "inner_sweeps", "status"]
    if header[: len(required)] != required:
        raise TraceFormatError(f"{path}: unexpected header {header!r}")
    has_points = len(header) > len(required)
    if has_points:
        expected = required + [f"x_{i}" for i in range(dim)] + [f"y_{i}" for i in range(dim)]
        if header != expected:
            raise TraceFormatError(f"{path}: coordinate columns do not match dim={dim}")
    if not has_points:
        raise TraceFormatError(
            f"{path}: trace has no coordinate columns (slim mode) and cannot be re-checked")

    rows = []
    terminal = None
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise TraceFormatError(f"{path}: line {lineno}: expected {len(header)} cells")
        where = f"{path}: line {lineno}"
        try:
            n = int(rec[0])
        except ValueError:
            raise TraceFormatError(f"{where}: bad step index {rec[0]!r}") from None
        d_x0 = _parse_float(rec[1], where)
        d_step = _parse_float(rec[2], where)
        cum = _parse_float(rec[3], where)
        sweeps = int(rec[4]) if rec[4] else 0
        status = rec[5]
        xs = rec[6 : 6 + dim]
        ys = rec[6 + dim : 6 + 2 * dim]
        x = None if all(c == "" for c in xs) else np.array(
            [_parse_float(c, where) for c in xs], dtype=float)
        y = None if all(c == "" for c in ys) else np.array(
            [_parse_float(c, where) for c in ys], dtype=float)
        if x is None:
            raise TraceFormatError(f"{where}: row without an iterate")
        if y is None:
            if terminal is not None:
                raise TraceFormatError(f"{where}: more than one terminal row")
            terminal = Terminal(n, x, d_x0 if d_x0 is not None else 0.0, status)
            continue
        cut = build_cut(f, x, y)
        rows.append(TraceRow(n, x, y, cut, d_x0 if d_x0 is not None else 0.0,
                             d_step, cum, sweeps, status))

    trace = IterationTrace(
        x0=x0, legendre_name=meta["legendre"], base=base, rows=rows,
        terminal=terminal, name=meta.get("name", "run"),
    )
    d_vals = [r.d_x0 for r in rows] + ([terminal.d_x0] if terminal else [])
    trace.beta_estimate = max(d_vals) if d_vals else 0.0
    return f, trace


def summary_dict(trace: IterationTrace) -> dict:
    """The machine-readable run summary written next to the trace."""
    out = {
        "name": trace.name,
        "legendre": trace.legendre_name,
        "outcome": trace.outcome.kind if trace.outcome else "unknown",
        "iterations": trace.iteration_count(),
        "beta_estimate": trace.beta_estimate,
        "total_step_distance": trace.total_step_distance(),
    }
    if trace.outcome is not None and trace.outcome.point is not None:
        out["final_point"] = [float(c) for c in trace.outcome.point]
    if trace.outcome is not None:
        if trace.outcome.fix_residual is not None:
            out["fix_residual"] = trace.outcome.fix_residual
        if trace.outcome.step_distance is not None:
            out["step_distance"] = trace.outcome.step_distance
        if trace.outcome.infeasible_at is not None:
            out["infeasible_at"] = trace.outcome.infeasible_at
            rep = trace.outcome.report
            if rep is not None:
                out["residual_floor"] = rep.residual_floor
                out["infeasibility_trigger"] = rep.trigger
    return out


def write_summary(path, trace: IterationTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary_dict(trace), fh, indent=2, sort_keys=True)
        fh.write("\n")
