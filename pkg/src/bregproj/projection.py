"""Bregman projections onto halfspaces and polyhedra, with certificates.

The projection of x onto C minimizes D(., x) over C.  For one halfspace
{z : <a, z> <= b} the minimizer is x itself when feasible and otherwise
xhat = conj_grad(grad(x) - lam * a) for the unique lam > 0 solving

    phi(lam) = <a, conj_grad(grad(x) - lam * a)> - b = 0,

a scalar root-finding problem; phi is nonincreasing because f* is convex.

For a polyhedron the solver works in the conjugate space on the dual point
theta = grad(x0) - sum lam_i a_i with multipliers lam >= 0, so stationarity
of the returned certificate holds by construction and only feasibility and
complementarity have to be driven to tolerance.  Two mechanisms cooperate:

  * cyclic dual coordinate ascent (a Hildreth/Dykstra scheme) visits one
    halfspace at a time, removing its multiplier and re-projecting through
    the scalar root finder; it is globally convergent for consistent
    systems but transfers dual mass between nearly parallel cuts at a rate
    proportional to their offset gap, which degenerates on the nested cuts
    the outer iteration produces;
  * an active-set Newton polish guesses the binding constraints, solves
    the reduced KKT system exactly (one linear solve per guess for the
    energy kernel, damped Newton otherwise), and re-guesses primal-dual
    style; whenever the polished certificate meets every tolerance it is
    returned immediately.  Exactly parallel dominated rows are ignored
    inside the polish only; the constraint system itself is never edited.

Emptiness of the polyhedron is only semi-decidable from the sweep history,
so two documented heuristics are layered: the multiplier-cap test (dual
norm above lambda_cap with the violation stuck for a full window) and a
stall-triggered linear feasibility probe that minimizes the worst
constraint violation directly and certifies a floor on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonconvergenceError, UsageError
from .legendre import LegendreFunction, as_point
from .sets import CutSet, Halfspace


@dataclass
class InnerSettings:
    """Knobs for the polyhedral projection solver.

    Tolerances are absolute but scaled by (1 + ||x0||) at solve time.
    """

    max_sweeps: int = 5000
    kkt_tol: float = 1e-9
    feas_tol: float = 1e-9
    comp_tol: float = 1e-9
    lambda_cap: float = 1e8
    stall_window: int = 50
    root_tol: float = 1e-12
    feasibility_probe: bool = True


@dataclass
class ProjectionResult:
    """A computed projection with its optimality certificate.

    stationarity_residual = ||grad(point) - grad(x0) + sum lam_i a_i||,
    max_violation is the worst constraint violation (0 when feasible), and
    complementarity_residual = max_i |lam_i * (<a_i, point> - b_i)|.
    """

    point: np.ndarray
    multipliers: np.ndarray
    stationarity_residual: float
    max_violation: float
    complementarity_residual: float
    inner_iterations: int


@dataclass
class InfeasibilityReport:
    """Evidence that the constraint system has no solution.

    residual_floor is a lower bound on the achievable worst violation
    (from the feasibility probe), witness_multipliers the associated dual
    weights, and diverged_multiplier_norm the size of the sweep multipliers
    when the heuristic fired.
    """

    witness_multipliers: np.ndarray
    residual_floor: float
    diverged_multiplier_norm: float
    trigger: str = "stall-probe"
    at_sweep: int = 0


def solve_halfspace_multiplier(f: LegendreFunction, hs: Halfspace, theta0, tol=1e-12,
                               max_evals=200) -> float:
    """Root of phi(lam) = <a, conj_grad(theta0 - lam a)> - b for lam > 0.

    Requires phi(0) > 0 (theta0's primal point violates the halfspace).
    Brackets by doubling lam until phi <= 0, halving back whenever the
    trial dual point leaves dom f*; then polishes with safeguarded Newton
    (secant when no curvature oracle is available), accepting a step only
    if it stays strictly inside the bracket and bisecting otherwise, down
    to relative bracket width 1e-14 or |phi| <= tol * (1 + |b|).

    Raises DomainError if the dual segment exits dom f* before a sign
    change is found; this cannot happen for the energy kernel.
    """
    a = hs.a
    b = hs.b
    norm_a_sq = float(a @ a)
    phi_tol = tol * (1.0 + abs(b))

    def in_dom(lam):
        return f.in_conj_domain(theta0 - lam * a)

    def phi(lam):
        return float(a @ f.conj_grad(theta0 - lam * a)) - b

    flo = phi(0.0)
    if flo <= 0.0:
        return 0.0
    lo = 0.0
    # Exact for the energy kernel, a sane scale otherwise.
    hi = flo / norm_a_sq
    cap = None  # smallest lam known to leave dom f*
    fhi = None
    evals = 1
    while True:
        if evals > max_evals:
            raise NonconvergenceError(
                "halfspace projection: bracketing did not find a sign change",
                {"phi_lo": flo, "lam_lo": lo, "evals": evals},
            )
        if cap is not None:
            hi = 0.5 * (lo + cap)
            if cap - lo <= 1e-15 * max(1.0, cap):
                raise DomainError(
                    "halfspace projection: dual segment leaves dom f* before the constraint is met"
                )
        if not in_dom(hi):
            cap = hi
            continue
        fhi = phi(hi)
        evals += 1
        if fhi <= 0.0:
            break
        lo, flo = hi, fhi
        if cap is None:
            hi = 2.0 * hi

    if fhi == 0.0:
        return hi

    x_prev, f_prev = lo, flo
    x_cur, f_cur = hi, fhi
    while hi - lo > 1e-14 * max(1.0, hi):
        # an endpoint may already sit on the root up to rounding
        if abs(flo) <= phi_tol:
            return lo
        if abs(fhi) <= phi_tol:
            return hi
        if evals > max_evals:
            raise NonconvergenceError(
                "halfspace projection: polish stage exceeded its evaluation cap",
                {"lo": lo, "hi": hi, "phi_lo": flo, "phi_hi": fhi},
            )
        cand = None
        hv = f.conj_hess_vec(theta0 - x_cur * a, a)
        if hv is not None:
            dphi = -float(a @ hv)
            if dphi < 0.0 and np.isfinite(dphi):
                cand = x_cur - f_cur / dphi
        if cand is None and f_cur != f_prev:
            cand = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev)
        if cand is None or not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        f_cand = phi(cand)
        evals += 1
        x_prev, f_prev = x_cur, f_cur
        x_cur, f_cur = cand, f_cand
        if f_cand > 0.0:
            lo, flo = cand, f_cand
        else:
            hi, fhi = cand, f_cand
        if abs(f_cand) <= phi_tol:
            return cand
    return hi


def dual_halfspace_update(f: LegendreFunction, hs: Halfspace, theta, tol=1e-12):
    """Project the primal point of theta onto one halfspace, in dual form.

    Returns (theta_new, lam, z_new) where z_new = conj_grad(theta_new)
    satisfies the halfspace and theta_new = theta - lam * a with lam >= 0.
    """
    z = f.conj_grad(theta)
    if hs.violation(z) <= 0.0:
        return theta, 0.0, z
    lam = solve_halfspace_multiplier(f, hs, theta, tol=tol)
    theta_new = theta - lam * hs.a
    return theta_new, lam, f.conj_grad(theta_new)


def project_halfspace(f: LegendreFunction, hs: Halfspace, x, tol=1e-12) -> np.ndarray:
    """Bregman projection of x onto one halfspace.

    Returns x unchanged when feasible; otherwise the boundary point
    conj_grad(grad(x) - lam* a) with |<a, xhat> - b| <= tol * (1 + |b|).
    """
    x = as_point(x, f.dim, name="x")
    if hs.dim != f.dim:
        raise UsageError(f"halfspace dimension {hs.dim} does not match kernel dimension {f.dim}")
    if hs.violation(x) <= 0.0:
        return x.copy()
    theta0 = f.grad(x)
    _, _, z = dual_halfspace_update(f, hs, theta0, tol=tol)
    return z


def _feasibility_probe(A, b):
    """Minimize the worst constraint violation of {A z <= b} by LP.

    Returns (floor, duals): floor is the least achievable worst violation
    clipped from below at -1, and duals are the nonnegative multipliers of
    the elastic constraints at the optimum.  Returns (None, None) when the
    LP solver fails, in which case the caller keeps sweeping.
    """
    from scipy.optimize import linprog

    m, d = A.shape
    c = np.zeros(d + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((m, 1))])
    bounds = [(None, None)] * d + [(-1.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if not res.success:
        return None, None
    floor = float(res.x[-1])
    marginals = getattr(getattr(res, "ineqlin", None), "marginals", None)
    if marginals is None:
        duals = np.zeros(m)
    else:
        duals = np.maximum(-np.asarray(marginals, dtype=float), 0.0)
    return floor, duals


def _conj_hessian_products(f, theta, rows):
    """Stack of H_{f*}(theta) a_i for the given constraint rows, or None."""
    out = np.empty_like(rows)
    for k in range(rows.shape[0]):
        hv = f.conj_hess_vec(theta, rows[k])
        if hv is None:
            return None
        out[k] = hv
    return out


def _dominated_parallel_mask(A, b):
    """Mark rows made redundant by an exactly parallel, tighter row.

    Only same-direction parallels count; a certificate that ignores a
    dominated row extends to the full system with a zero multiplier.
    """
    m = A.shape[0]
    norms = np.linalg.norm(A, axis=1)
    unit = A / norms[:, None]
    scaled = b / norms
    dominated = np.zeros(m, dtype=bool)
    for i in range(m):
        if dominated[i]:
            continue
        for j in range(m):
            if i == j or dominated[j]:
                continue
            if np.max(np.abs(unit[i] - unit[j])) <= 1e-12:
                # keep the tighter row; on ties keep the earlier one
                if scaled[j] > scaled[i] or (scaled[j] == scaled[i] and j > i):
                    dominated[j] = True
    return dominated


def _select_independent_rows(A, order, max_rows):
    """Greedy subset of the ordered candidate rows with well-conditioned
    normalized directions.

    A row joins only if its direction keeps a substantial component outside
    the span of the rows already chosen.  At most max_rows survive, which
    matches the dimension of the primal space where at most that many
    independent constraints can bind.
    """
    chosen = []
    basis = []
    for i in order:
        v = A[i] / np.linalg.norm(A[i])
        w = v.copy()
        for q in basis:
            w -= (w @ q) * q
        nrm = float(np.linalg.norm(w))
        if nrm > 1e-8:
            chosen.append(int(i))
            basis.append(w / nrm)
            if len(chosen) >= max_rows:
                break
    return np.array(sorted(chosen), dtype=int)


def _active_set_polish(f, A, b, theta_anchor, lam, feas_target, comp_target=None,
                       max_outer=40):
    """Solve the reduced KKT system on a guessed set of binding rows.

    Starting from the positive / violated rows of the current multipliers,
    alternately (a) solves A_W conj_grad(theta_anchor - A_W^T lam_W) = b_W
    by damped Newton on the working set W and (b) updates W primal-dual
    style: rows with negative multipliers leave, violated rows enter.
    Returns a full multiplier vector when the guess stabilizes, else None.

    The working set is filtered before every solve: exactly parallel
    dominated rows are skipped, and of nearly dependent candidates only the
    best-scoring independent subset (by violation, then multiplier weight)
    is kept, since at most dim constraints can bind independently.  Rows
    left out simply carry a zero multiplier, which is how stale dual mass
    on superseded cuts is shed in one step.

    The Newton residual target adapts to the multiplier size: un-normalized
    cuts can carry multipliers of order 1/||a||, and the absolute
    complementarity bound then requires the working-set violations to be
    solved proportionally tighter.
    """
    m = A.shape[0]
    if comp_target is None:
        comp_target = feas_target
    dominated = _dominated_parallel_mask(A, b)
    theta = theta_anchor - A.T @ lam
    if not f.in_conj_domain(theta):
        return None
    z = f.conj_grad(theta)
    viol = A @ z - b
    row_norms = np.linalg.norm(A, axis=1)
    work = ((lam > 0.0) | (viol > 0.0)) & ~dominated

    for _ in range(max_outer):
        candidates = np.flatnonzero(work)
        if candidates.size:
            # strict priority: violated rows by relative violation, then
            # rows carrying dual mass, then proximity to the boundary
            rel = viol / row_norms
            mass = lam * row_norms
            keys = np.lexsort((-mass[candidates], -rel[candidates],
                               -(viol[candidates] > 0).astype(float)))
            idx = _select_independent_rows(A, candidates[keys], f.dim)
        else:
            idx = candidates
        precise = True
        if idx.size == 0:
            lam_full = np.zeros(m)
            theta = theta_anchor
        else:
            A_w = A[idx]
            b_w = b[idx]
            lam_w = np.maximum(lam[idx], 0.0)
            ok = False
            stalled = False
            prev_rmax = np.inf
            for _ in range(50):
                theta = theta_anchor - A_w.T @ lam_w
                if not f.in_conj_domain(theta):
                    return None
                z = f.conj_grad(theta)
                r = A_w @ z - b_w
                rmax = float(np.max(np.abs(r)))
                r_target = min(0.01 * feas_target,
                               comp_target / max(1.0, float(np.max(np.abs(lam_w)))))
                if rmax <= r_target:
                    ok = True
                    precise = True
                    break
                if rmax >= 0.5 * prev_rmax:
                    # Stagnation: nearly dependent rows were jointly forced
                    # active and the solve cannot reach the target.  The
                    # multiplier signs are still trustworthy for the
                    # enter/leave decisions (a wrong row shows up with a
                    # large negative multiplier).
                    stalled = True
                    ok = rmax <= 0.01 * feas_target
                    precise = False
                    break
                prev_rmax = rmax
                HA = _conj_hessian_products(f, theta, A_w)
                if HA is None:
                    return None
                M = A_w @ HA.T
                try:
                    delta = np.linalg.solve(M, r)
                except np.linalg.LinAlgError:
                    delta, *_ = np.linalg.lstsq(M, r, rcond=None)
                if not np.all(np.isfinite(delta)):
                    return None
                # damp the step until the dual point stays in dom f*
                t = 1.0
                for _ in range(40):
                    if f.in_conj_domain(theta_anchor - A_w.T @ (lam_w + t * delta)):
                        break
                    t *= 0.5
                else:
                    return None
                lam_w = lam_w + t * delta
            if not ok:
                if stalled and np.any(lam_w < 0.0):
                    # drop the rows the failed solve pushed negative and
                    # restart from the clipped multipliers
                    lam_full = np.zeros(m)
                    lam_full[idx] = lam_w
                    work = work & ~(lam_full < 0.0)
                    lam = np.maximum(lam_full, 0.0)
                    theta = theta_anchor - A.T @ lam
                    if not f.in_conj_domain(theta):
                        return None
                    z = f.conj_grad(theta)
                    viol = A @ z - b
                    continue
                return None
            lam_full = np.zeros(m)
            lam_full[idx] = lam_w
            theta = theta_anchor - A_w.T @ lam_w

        z = f.conj_grad(theta)
        viol = A @ z - b
        leave = lam_full < 0.0
        enter = (viol > 0.01 * feas_target) & ~dominated
        if not np.any(leave) and not np.any(enter):
            # only a solve that met the adaptive target can certify
            return np.maximum(lam_full, 0.0) if precise else None
        work = (work & ~leave) | enter
        lam = np.maximum(lam_full, 0.0)
    return None


def _residuals(f, A, b, theta_anchor, lam):
    theta = theta_anchor - A.T @ lam
    if not f.in_conj_domain(theta):
        raise DomainError("accumulated multipliers pushed the dual point out of dom f*")
    z = f.conj_grad(theta)
    viols = A @ z - b
    max_viol = float(max(0.0, viols.max()))
    comp = float(np.max(np.abs(lam * viols)))
    stat = float(np.linalg.norm(f.grad(z) - theta))
    return z, viols, stat, max_viol, comp


def project_cutset(f: LegendreFunction, cs: CutSet, x0, settings: InnerSettings | None = None,
                   warm_multipliers=None):
    """Bregman projection of x0 onto the polyhedron represented by cs.

    Returns a ProjectionResult whose stationarity, feasibility and
    complementarity residuals all meet the settings' tolerances scaled by
    (1 + ||x0||), or an InfeasibilityReport when an emptiness heuristic
    fires, and raises NonconvergenceError when the sweep cap is exhausted.

    warm_multipliers seeds the dual vector (shorter vectors are padded with
    zeros, which is how a freshly appended cut enters); a warm start whose
    dual point leaves dom f* is discarded and the solve restarts cold.
    """
    s = settings or InnerSettings()
    x0 = as_point(x0, f.dim, name="x0")
    halfspaces = cs.halfspaces()
    m = len(halfspaces)
    if m == 0:
        return ProjectionResult(x0.copy(), np.zeros(0), 0.0, 0.0, 0.0, 0)
    A, b = cs.matrix()
    scale = 1.0 + float(np.linalg.norm(x0))
    theta_anchor = f.grad(x0)

    lam = np.zeros(m)
    if warm_multipliers is not None:
        warm = np.asarray(warm_multipliers, dtype=float)
        if warm.size > m:
            raise UsageError(f"warm start has {warm.size} multipliers for {m} constraints")
        lam[: warm.size] = np.maximum(warm, 0.0)
    if not f.in_conj_domain(theta_anchor - A.T @ lam):
        lam[:] = 0.0

    def finish(lam_vec, sweeps):
        z, _, stat, max_viol, comp = _residuals(f, A, b, theta_anchor, lam_vec)
        if stat <= s.kkt_tol * scale and max_viol <= s.feas_tol * scale \
                and comp <= s.comp_tol * scale:
            return ProjectionResult(z, lam_vec.copy(), stat, max_viol, comp, sweeps)
        return None

    best_viol = np.inf
    stall = 0
    capped = 0
    probed = False
    stat = max_viol = comp = np.nan

    for sweep in range(1, s.max_sweeps + 1):
        if sweep <= 5 or sweep % 5 == 0:
            polished = _active_set_polish(f, A, b, theta_anchor, lam,
                                          feas_target=s.feas_tol * scale,
                                          comp_target=s.comp_tol * scale)
            if polished is not None:
                done = finish(polished, sweep - 1)
                if done is not None:
                    return done

        theta = theta_anchor - A.T @ lam
        for i, hs in enumerate(halfspaces):
            theta_i = theta + lam[i] * hs.a
            if not f.in_conj_domain(theta_i):
                raise DomainError(
                    f"dual point left dom f* while relaxing constraint {i} (sweep {sweep})"
                )
            theta, lam_i, _ = dual_halfspace_update(f, hs, theta_i, tol=s.root_tol)
            lam[i] = lam_i
        # Re-anchor once per sweep to stop roundoff drift in theta.
        z, viols, stat, max_viol, comp = _residuals(f, A, b, theta_anchor, lam)
        if stat <= s.kkt_tol * scale and max_viol <= s.feas_tol * scale \
                and comp <= s.comp_tol * scale:
            return ProjectionResult(z, lam.copy(), stat, max_viol, comp, sweep)

        if max_viol > s.feas_tol * scale:
            if max_viol >= best_viol * (1.0 - 1e-2):
                stall += 1
            else:
                stall = 0
            best_viol = min(best_viol, max_viol)
            lam_norm = float(np.linalg.norm(lam))
            capped = capped + 1 if lam_norm > s.lambda_cap else 0
            fire_cap = capped >= s.stall_window
            fire_stall = s.feasibility_probe and not probed and stall >= s.stall_window
            if fire_cap or fire_stall:
                floor, duals = (None, None)
                if s.feasibility_probe:
                    probed = True
                    floor, duals = _feasibility_probe(A, b)
                if floor is not None and floor <= max(s.feas_tol * scale, 1e-12):
                    # Certified nonempty; the sweeps are just slow.
                    stall = 0
                    capped = 0
                    continue
                if floor is None:
                    if not fire_cap:
                        continue
                    floor = max_viol  # best available evidence
                    duals = lam / max(lam_norm, 1.0)
                return InfeasibilityReport(
                    witness_multipliers=duals,
                    residual_floor=float(floor),
                    diverged_multiplier_norm=lam_norm,
                    trigger="multiplier-cap" if fire_cap else "stall-probe",
                    at_sweep=sweep,
                )
        else:
            stall = 0
            capped = 0

    polished = _active_set_polish(f, A, b, theta_anchor, lam,
                                  feas_target=s.feas_tol * scale,
                                  comp_target=s.comp_tol * scale)
    if polished is not None:
        done = finish(polished, s.max_sweeps)
        if done is not None:
            return done
    raise NonconvergenceError(
        f"polyhedral projection did not converge in {s.max_sweeps} sweeps",
        {
            "stationarity": stat,
            "max_violation": max_viol,
            "complementarity": comp,
            "multiplier_norm": float(np.linalg.norm(lam)),
        },
    )


def three_point_residual(f: LegendreFunction, c, x, xhat) -> float:
    """D(c, x) - D(c, xhat) - D(xhat, x).

    Nonnegative (up to solver tolerance) whenever xhat is the projection of
    x onto a set containing c.
    """
    from .legendre import bregman_distance

    return (
        bregman_distance(f, c, x)
        - bregman_distance(f, c, xhat)
        - bregman_distance(f, xhat, x)
    )


def variational_residual(f: LegendreFunction, cs: CutSet, x0, xhat, probes,
                         feas_tol=1e-9) -> float:
    """max over probes c of <grad(x0) - grad(xhat), c - xhat>.

    Nonpositive (up to solver tolerance) when xhat is the projection of x0
    onto cs.  Probes must be feasible; an infeasible probe is a usage error.
    """
    x0 = as_point(x0, f.dim, name="x0")
    xhat = as_point(xhat, f.dim, name="xhat")
    g = f.grad(x0) - f.grad(xhat)
    worst = -np.inf
    for k, raw in enumerate(probes):
        c = as_point(raw, f.dim, name=f"probe[{k}]")
        if not cs.contains(c, tol=feas_tol):
            raise UsageError(f"probe[{k}] is not feasible for the constraint set")
        worst = max(worst, float(g @ (c - xhat)))
    if worst == -np.inf:
        raise UsageError("variational_residual requires at least one probe")
    return worst
