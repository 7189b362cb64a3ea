"""The outer cut-accumulating iteration and its trace checker.

Each step queries the oracle at the current iterate x_n, intersects the
constraint system with the cut generated by (x_n, y_n), and re-projects the
original anchor x0 onto the shrunken system.  A run ends in exactly one of
four ways: the fixed-point and step criteria are met (converged), the inner
solver certifies an empty system (infeasible), the iterate norm exceeds the
divergence radius (diverging), or the iteration budget runs out.

Along any run the distance from the anchor is nondecreasing, the iterates
nest into every earlier constraint set, and the step distances are summable
against the final anchor distance; verify_trace re-checks all of these on a
recorded trace, plus two pairwise inequalities tying iterates to earlier
cut generators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, UsageError
from .legendre import LegendreFunction, as_point, bregman_distance
from .projection import InfeasibilityReport, InnerSettings, project_cutset
from .sets import Cut, CutSet, build_cut

log = logging.getLogger("bregproj")


def _always_true(_):
    return True


@dataclass
class OracleMap:
    """The map producing y_n from x_n, with an optional domain predicate."""

    apply: callable
    domain_check: callable = _always_true
    name: str = "oracle"


@dataclass
class TraceRow:
    """One outer step: the iterate, the oracle output, the cut they generate,
    and the distances recorded after the re-projection.  d_step and cum are
    None when the step failed to produce a successor (empty system)."""

    n: int
    x: np.ndarray | None
    y: np.ndarray | None
    cut: Cut | None
    d_x0: float
    d_step: float | None
    cum: float | None
    inner_sweeps: int
    status: str = "ok"


@dataclass
class Terminal:
    """The final accepted point, when the run produced one."""

    n: int
    x: np.ndarray | None
    d_x0: float
    status: str


@dataclass
class Outcome:
    """Exactly one of converged / diverging / infeasible / max_iterations."""

    kind: str
    point: np.ndarray | None = None
    fix_residual: float | None = None
    step_distance: float | None = None
    norm_history: list = field(default_factory=list)
    infeasible_at: int | None = None
    report: InfeasibilityReport | None = None

    KINDS = ("converged", "diverging", "infeasible", "max_iterations")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise UsageError(f"unknown outcome kind {self.kind!r}")


@dataclass
class IterationTrace:
    """Full record of a run: per-step rows, the terminal point when one
    exists, the running supremum of the anchor distance, and the outcome."""

    x0: np.ndarray
    legendre_name: str
    base: list
    rows: list = field(default_factory=list)
    terminal: Terminal | None = None
    beta_estimate: float = 0.0
    outcome: Outcome | None = None
    name: str = "run"

    def points(self) -> list:
        xs = [r.x for r in self.rows]
        if self.terminal is not None:
            xs.append(self.terminal.x)
        return xs

    def total_step_distance(self) -> float:
        return sum(r.d_step for r in self.rows if r.d_step is not None)

    def iteration_count(self) -> int:
        return len(self.rows)


@dataclass
class DriverConfig:
    """Everything a run needs.  divergence_radius defaults to
    1e6 * (1 + ||x0||); the stopping test requires both the fixed-point
    residual ||x_n - y_n|| <= eps_fix and the step distance
    D(x_{n+1}, x_n) <= eps_step."""

    f: LegendreFunction
    oracle: OracleMap
    x0: np.ndarray
    cutset: CutSet
    eps_fix: float = 1e-8
    eps_step: float = 1e-8
    max_iter: int = 1000
    divergence_radius: float | None = None
    inner: InnerSettings = field(default_factory=InnerSettings)
    store_points: bool = True
    name: str = "run"

    def __post_init__(self):
        self.x0 = as_point(self.x0, self.f.dim, name="x0")
        if self.eps_fix <= 0 or self.eps_step <= 0:
            raise UsageError("stopping tolerances must be positive")
        if int(self.max_iter) < 1:
            raise UsageError("max_iter must be >= 1")
        if self.cutset.dim != self.f.dim:
            raise UsageError("constraint set dimension does not match the kernel")
        if self.divergence_radius is None:
            self.divergence_radius = 1e6 * (1.0 + float(np.linalg.norm(self.x0)))
        if self.divergence_radius <= 0:
            raise UsageError("divergence_radius must be positive")


@dataclass
class RunState:
    """Mutable state of one run; owned by a single thread of control."""

    cfg: DriverConfig
    n: int
    x: np.ndarray
    cutset: CutSet
    multipliers: np.ndarray
    trace: IterationTrace
    norm_history: list
    cum: float = 0.0
    outcome: Outcome | None = None


def start(cfg: DriverConfig) -> RunState:
    """Initial state; the constraint system is copied so cfg stays reusable."""
    trace = IterationTrace(
        x0=cfg.x0.copy(),
        legendre_name=cfg.f.name,
        base=list(cfg.cutset.base),
        name=cfg.name,
    )
    return RunState(
        cfg=cfg,
        n=0,
        x=cfg.x0.copy(),
        cutset=cfg.cutset.copy(),
        multipliers=np.zeros(len(cfg.cutset)),
        trace=trace,
        norm_history=[float(np.linalg.norm(cfg.x0))],
    )


def step(state: RunState) -> RunState:
    """Execute one outer iteration in place and return the state.

    Queries the oracle, appends the cut, re-projects the anchor onto the
    grown system (warm-starting the dual from the previous step), records
    the trace row, and sets the outcome when the stopping test passes or
    the inner solver certifies emptiness.
    """
    if state.outcome is not None:
        raise UsageError("step called on a terminated run")
    cfg = state.cfg
    f = cfg.f
    n = state.n
    x_n = state.x

    if not cfg.oracle.domain_check(x_n):
        raise DomainError(f"iterate left the oracle domain at step {n}")
    y_n = as_point(cfg.oracle.apply(x_n), f.dim, name="oracle output")

    cut = build_cut(f, x_n, y_n)
    state.cutset.append(cut)
    warm = state.multipliers
    if not cut.is_universal:
        warm = np.append(warm, 0.0)

    d_x0 = bregman_distance(f, x_n, cfg.x0)
    state.trace.beta_estimate = max(state.trace.beta_estimate, d_x0)

    res = project_cutset(f, state.cutset, cfg.x0, cfg.inner, warm_multipliers=warm)
    keep = cfg.store_points
    if isinstance(res, InfeasibilityReport):
        state.trace.rows.append(
            TraceRow(n, x_n.copy() if keep else None, y_n.copy() if keep else None,
                     cut, d_x0, None, None, res.at_sweep, status="infeasible")
        )
        state.outcome = Outcome(
            "infeasible", point=x_n.copy(), infeasible_at=n, report=res,
            norm_history=list(state.norm_history),
        )
        state.trace.outcome = state.outcome
        log.info("run %s: constraint system empty at step %d", cfg.name, n)
        return state

    x_next = res.point
    d_step = bregman_distance(f, x_next, x_n)
    state.cum += d_step
    state.trace.rows.append(
        TraceRow(n, x_n.copy() if keep else None, y_n.copy() if keep else None,
                 cut, d_x0, d_step, state.cum, res.inner_iterations)
    )

    fix_res = float(np.linalg.norm(x_n - y_n))
    state.x = x_next
    state.multipliers = res.multipliers
    state.n = n + 1
    state.norm_history.append(float(np.linalg.norm(x_next)))
    log.debug("run %s step %d: fix residual %.3e, step distance %.3e",
              cfg.name, n, fix_res, d_step)

    if fix_res <= cfg.eps_fix and d_step <= cfg.eps_step:
        d_final = bregman_distance(f, x_next, cfg.x0)
        state.trace.beta_estimate = max(state.trace.beta_estimate, d_final)
        state.trace.terminal = Terminal(n + 1, x_next.copy() if keep else None,
                                        d_final, "converged")
        state.outcome = Outcome(
            "converged", point=x_next.copy(), fix_residual=fix_res,
            step_distance=d_step, norm_history=list(state.norm_history),
        )
        state.trace.outcome = state.outcome
    return state


def run(cfg: DriverConfig) -> IterationTrace:
    """Iterate until one of the four terminal branches is reached.

    The returned trace always carries the outcome; its rows are complete
    even for non-converged runs.
    """
    state = start(cfg)
    f = cfg.f
    while state.outcome is None:
        norm_x = float(np.linalg.norm(state.x))
        if norm_x > cfg.divergence_radius:
            d_x0 = bregman_distance(f, state.x, cfg.x0)
            state.trace.beta_estimate = max(state.trace.beta_estimate, d_x0)
            state.trace.terminal = Terminal(
                state.n, state.x.copy() if cfg.store_points else None, d_x0, "diverging")
            state.outcome = Outcome("diverging", point=state.x.copy(),
                                    norm_history=list(state.norm_history))
            break
        if state.n >= cfg.max_iter:
            d_x0 = bregman_distance(f, state.x, cfg.x0)
            state.trace.beta_estimate = max(state.trace.beta_estimate, d_x0)
            state.trace.terminal = Terminal(
                state.n, state.x.copy() if cfg.store_points else None, d_x0, "max_iterations")
            state.outcome = Outcome("max_iterations", point=state.x.copy(),
                                    norm_history=list(state.norm_history))
            break
        state = step(state)
    state.trace.outcome = state.outcome
    return state.trace


@dataclass
class Violation:
    """One failed trace check; m is None for single-index checks."""

    check: str
    n: int
    m: int | None
    amount: float
    detail: str = ""


def verify_trace(f: LegendreFunction, trace: IterationTrace, tol=1e-8) -> list:
    """Re-check the structural inequalities of a recorded run.

    For all recorded indices m < n this verifies:

      distance-monotone   D(x_n, x0) >= D(x_m, x0) - tol
      nesting             x_n lies in every earlier constraint system
      path-sum            sum_{j<=k} D(x_{j+1}, x_j) <= D(x_{k+1}, x0) + tol
      anchor-optimality   <grad(x0) - grad(x_m), x_n - x_m> <= tol
      cut-consistency     D(x_n, y_m) <= D(x_n, x_m) + tol

    All quantities are recomputed from the stored points, so the checks are
    independent of the distance columns the driver recorded.  Traces stored
    without points cannot be verified.
    """
    xs = trace.points()
    if any(x is None for x in xs):
        raise UsageError("trace was recorded without points and cannot be verified")
    if not xs:
        return []
    x0 = trace.x0
    violations = []
    d0 = [bregman_distance(f, x, x0) for x in xs]
    cuts = [r.cut for r in trace.rows]
    ys = [r.y for r in trace.rows]
    N = len(xs)

    for n in range(N):
        for m_idx in range(n):
            gap = d0[n] - d0[m_idx]
            if gap < -tol:
                violations.append(Violation(
                    "distance-monotone", n, m_idx, gap,
                    f"D(x_{n},x0)={d0[n]:.6e} < D(x_{m_idx},x0)={d0[m_idx]:.6e}"))

    for n in range(1, N):
        for hs in trace.base:
            v = hs.violation(xs[n])
            if not hs.contains(xs[n], tol):
                violations.append(Violation(
                    "nesting", n, None, v, "iterate violates a base halfspace"))
        for j in range(min(n, len(cuts))):
            cut = cuts[j]
            if cut is None or cut.is_universal:
                continue
            hs = cut.halfspace
            if not hs.contains(xs[n], tol):
                violations.append(Violation(
                    "nesting", n, j, hs.violation(xs[n]),
                    f"iterate {n} violates the cut generated at step {j}"))

    running = 0.0
    for k in range(N - 1):
        running += bregman_distance(f, xs[k + 1], xs[k])
        gap = d0[k + 1] + tol - running
        if gap < 0:
            violations.append(Violation(
                "path-sum", k, None, -gap,
                f"prefix sum {running:.6e} exceeds D(x_{k+1},x0)={d0[k+1]:.6e}"))

    g0 = f.grad(x0)
    for m_idx in range(N - 1):
        gm = f.grad(xs[m_idx])
        for n in range(m_idx + 1, N):
            val = float((g0 - gm) @ (xs[n] - xs[m_idx]))
            if val > tol:
                violations.append(Violation(
                    "anchor-optimality", n, m_idx, val,
                    "positive inner product against an earlier projection"))

    for m_idx in range(len(ys)):
        if ys[m_idx] is None:
            continue
        for n in range(m_idx + 1, N):
            lhs = bregman_distance(f, xs[n], ys[m_idx])
            rhs = bregman_distance(f, xs[n], xs[m_idx])
            if lhs > rhs + tol:
                violations.append(Violation(
                    "cut-consistency", n, m_idx, lhs - rhs,
                    f"D(x_{n},y_{m_idx}) exceeds D(x_{n},x_{m_idx})"))

    return violations
