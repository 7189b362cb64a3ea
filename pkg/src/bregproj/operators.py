"""Quasi Bregman nonexpansive operators: subgradient projectors and friends.

Given a continuous convex g with a nonempty zero-sublevel set and a
subgradient selection s, the level cut at z is the halfspace

    {x : g(z) + <s(z), x - z> <= 0},

which contains the whole sublevel set.  The subgradient projector sends z
to the Bregman projection of z onto its own level cut; its fixed points are
exactly the sublevel set, it is quasi Bregman nonexpansive for the kernel
used, and it is closed under vanishing fixed-point residuals.  Under the
energy kernel it reduces to the classical explicit formula, with the
distance-power and Moreau-envelope operators as special cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .driver import OracleMap
from .errors import FixtureError, NumericalDegeneracyError, UsageError
from .legendre import EnergyFunction, LegendreFunction, as_point
from .projection import project_halfspace
from .sets import Cut, Halfspace


@dataclass
class LevelSetProblem:
    """A convex constraint g <= 0 given by value and subgradient callables.

    feasible_point witnesses that the sublevel set is nonempty; fixtures
    supply it so tests can assert the standing assumption instead of
    trusting it.
    """

    g: callable
    subgrad: callable
    name: str = "level-set"
    feasible_point: np.ndarray | None = None


@dataclass
class ProxOracle:
    """A convex h with its proximal map P_h(x) = argmin h(w) + ||w-x||^2/2."""

    h_eval: callable
    prox: callable
    name: str = "prox"


def level_cut(prob: LevelSetProblem, z) -> Cut:
    """The linearization halfspace of g <= 0 at z.

    Universal when the subgradient vanishes at a feasible z.  A vanishing
    subgradient at an infeasible z would make g globally positive,
    contradicting the nonempty-sublevel assumption, so that case is a
    fixture error.
    """
    z = as_point(z, name="z")
    s = as_point(prob.subgrad(z), z.size, name="subgradient")
    gz = float(prob.g(z))
    if float(s @ s) > 0.0:
        return Cut.of(Halfspace(s, float(s @ z) - gz))
    if gz <= 0.0:
        return Cut.universal()
    raise FixtureError(
        f"{prob.name}: zero subgradient at an infeasible point (g={gz:.3g} > 0); "
        "the sublevel set would be empty"
    )


def bregman_subgradient_projector(f: LegendreFunction, prob: LevelSetProblem, z,
                                  tol=1e-12) -> np.ndarray:
    """Project z onto its level cut in the geometry of f.

    Feasible points are fixed; infeasible points move to the boundary of
    the linearization halfspace.
    """
    z = as_point(z, f.dim, name="z")
    if float(prob.g(z)) <= 0.0:
        return z.copy()
    cut = level_cut(prob, z)
    # g(z) > 0 rules out the universal branch inside level_cut.
    return project_halfspace(f, cut.halfspace, z, tol=tol)


def classical_subgradient_projector(prob: LevelSetProblem, z) -> np.ndarray:
    """The energy-kernel specialization: z - (g(z)/||s||^2) s when g(z) > 0."""
    z = as_point(z, name="z")
    gz = float(prob.g(z))
    if gz <= 0.0:
        return z.copy()
    s = as_point(prob.subgrad(z), z.size, name="subgradient")
    ss = float(s @ s)
    if ss == 0.0:
        raise FixtureError(f"{prob.name}: zero gradient at an infeasible point")
    return z - (gz / ss) * s


def distance_power_projector(project_onto, p, z) -> np.ndarray:
    """(1 - 1/p) z + (1/p) P(z) for an exact projector P and p >= 1.

    At p = 1 this is the projector itself; fixed points are exactly the
    target set for every p.
    """
    if p < 1.0:
        raise UsageError(f"distance power requires p >= 1, got {p}")
    z = as_point(z, name="z")
    q = as_point(project_onto(z), z.size, name="projection")
    return (1.0 - 1.0 / p) * z + (1.0 / p) * q


def moreau_envelope(prox: ProxOracle, z) -> float:
    """h(P_h(z)) + ||z - P_h(z)||^2 / 2, evaluated through the prox oracle."""
    z = as_point(z, name="z")
    p = as_point(prox.prox(z), z.size, name="prox output")
    return float(prox.h_eval(p)) + 0.5 * float((z - p) @ (z - p))


def moreau_projector(prox: ProxOracle, z) -> np.ndarray:
    """Subgradient projector for the Moreau envelope of h, in closed form.

    With p = P_h(z) and e = h(p) + ||z-p||^2/2: returns z when e <= 0,
    otherwise the combination

        ((e - 2 h(p)) z + e p) / (2 (e - h(p))).

    The denominator equals ||z - p||^2; when it underflows while e > 0 the
    exact theory offers no value, so a degeneracy error is raised.
    """
    z = as_point(z, name="z")
    p = as_point(prox.prox(z), z.size, name="prox output")
    hp = float(prox.h_eval(p))
    e = hp + 0.5 * float((z - p) @ (z - p))
    if e <= 0.0:
        return z.copy()
    denom = 2.0 * (e - hp)
    if denom < 1e-14:
        raise NumericalDegeneracyError(
            f"{prox.name}: envelope value {e:.3g} > 0 with z at its own prox "
            f"(denominator {denom:.3g}); no finite update exists"
        )
    return ((e - 2.0 * hp) / denom) * z + (e / denom) * p


@dataclass
class QbneViolation:
    fixed_point: np.ndarray
    sample: np.ndarray
    d_to_image: float
    d_to_sample: float

    @property
    def excess(self) -> float:
        return self.d_to_image - self.d_to_sample


def qbne_check(f: LegendreFunction, oracle: OracleMap, fixed_points, samples,
               tol=1e-10) -> list:
    """Test D(x, T y) <= D(x, y) + tol over all fixed points x and samples y.

    The fixed points are re-verified first (||T x - x|| <= tol); a stale
    fixed point is a usage error, not a violation.
    """
    from .legendre import bregman_distance

    fixed = [as_point(x, f.dim, name="fixed point") for x in fixed_points]
    for x in fixed:
        if float(np.linalg.norm(as_point(oracle.apply(x), f.dim) - x)) > tol:
            raise UsageError(f"claimed fixed point {x} moves under {oracle.name}")
    violations = []
    for y_raw in samples:
        y = as_point(y_raw, f.dim, name="sample")
        ty = as_point(oracle.apply(y), f.dim, name="operator output")
        for x in fixed:
            lhs = bregman_distance(f, x, ty)
            rhs = bregman_distance(f, x, y)
            if lhs > rhs + tol:
                violations.append(QbneViolation(x, y, lhs, rhs))
    return violations


# ---------------------------------------------------------------------------
# Exact Euclidean projectors used as scenario building blocks.

def halfspace_projector(a, b):
    """Orthogonal projection onto {z : <a, z> <= b}."""
    a = as_point(a, name="a")
    nsq = float(a @ a)
    if nsq == 0.0:
        raise UsageError("halfspace normal must be nonzero")

    def project(z):
        z = as_point(z, a.size, name="z")
        v = float(a @ z) - b
        if v <= 0.0:
            return z.copy()
        return z - (v / nsq) * a

    return project


def box_projector(lo, hi):
    """Componentwise clip onto [lo, hi]."""
    lo = as_point(lo, name="lo")
    hi = as_point(hi, name="hi", dim=lo.size)
    if not np.all(lo <= hi):
        raise UsageError("box requires lo <= hi")

    def project(z):
        return np.clip(as_point(z, lo.size, name="z"), lo, hi)

    return project


def ball_projector(center, radius):
    """Radial projection onto the closed ball B(center, radius)."""
    center = as_point(center, name="center")
    if radius <= 0:
        raise UsageError("ball radius must be positive")

    def project(z):
        z = as_point(z, center.size, name="z")
        d = z - center
        nrm = float(np.linalg.norm(d))
        if nrm <= radius:
            return z.copy()
        return center + (radius / nrm) * d

    return project


# ---------------------------------------------------------------------------
# The level-set fixture catalog.

def affine_level(a, b) -> LevelSetProblem:
    """g(x) = <a, x> - b."""
    a = as_point(a, name="a")
    nsq = float(a @ a)
    if nsq == 0.0:
        raise UsageError("affine level set requires a nonzero slope")
    feas = (float(b) - 1.0) / nsq * a
    return LevelSetProblem(
        g=lambda x: float(a @ as_point(x, a.size)) - float(b),
        subgrad=lambda x: a.copy(),
        name="affine",
        feasible_point=feas,
    )


def quadratic_ball_level(radius, center=None, dim=None) -> LevelSetProblem:
    """g(x) = ||x - c||^2 - r^2; sublevel set is the ball B(c, r)."""
    if radius <= 0:
        raise UsageError("ball radius must be positive")
    if center is None:
        if dim is None:
            raise UsageError("quadratic ball needs a center or a dimension")
        center = np.zeros(int(dim))
    center = as_point(center, name="center")
    return LevelSetProblem(
        g=lambda x: float(np.sum((as_point(x, center.size) - center) ** 2)) - radius ** 2,
        subgrad=lambda x: 2.0 * (as_point(x, center.size) - center),
        name="quadratic-ball",
        feasible_point=center.copy(),
    )


def abs_norm_level(radius, center=None, dim=None) -> LevelSetProblem:
    """g(x) = ||x - c|| - r with the selection s(c) = 0 at the kink."""
    if radius <= 0:
        raise UsageError("radius must be positive")
    if center is None:
        if dim is None:
            raise UsageError("abs-norm level needs a center or a dimension")
        center = np.zeros(int(dim))
    center = as_point(center, name="center")

    def subgrad(x):
        d = as_point(x, center.size) - center
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            return np.zeros(center.size)
        return d / nrm

    return LevelSetProblem(
        g=lambda x: float(np.linalg.norm(as_point(x, center.size) - center)) - radius,
        subgrad=subgrad,
        name="abs-norm",
        feasible_point=center.copy(),
    )


def max_affine_level(rows, feasible_point=None) -> LevelSetProblem:
    """g(x) = max_i (<a_i, x> - b_i), subgradient from the first argmax."""
    mats = [(as_point(a, name="a"), float(b)) for a, b in rows]
    if not mats:
        raise UsageError("max-affine needs at least one row")
    dim = mats[0][0].size
    for a, _ in mats:
        if a.size != dim:
            raise UsageError("max-affine rows disagree on dimension")

    def g(x):
        x = as_point(x, dim)
        return max(float(a @ x) - b for a, b in mats)

    def subgrad(x):
        x = as_point(x, dim)
        vals = [float(a @ x) - b for a, b in mats]
        return mats[int(np.argmax(vals))][0].copy()

    prob = LevelSetProblem(g=g, subgrad=subgrad, name="max-affine",
                           feasible_point=None)
    if feasible_point is not None:
        fp = as_point(feasible_point, dim, name="feasible_point")
        if g(fp) > 0:
            raise FixtureError("max-affine feasible_point has g > 0")
        prob.feasible_point = fp
    return prob


# ---------------------------------------------------------------------------
# Prox oracle fixtures.

def affine_prox(a, b) -> ProxOracle:
    """h(x) = <a, x> - b; the prox is a constant shift by a."""
    a = as_point(a, name="a")
    return ProxOracle(
        h_eval=lambda w: float(a @ as_point(w, a.size)) - float(b),
        prox=lambda x: as_point(x, a.size) - a,
        name="affine",
    )


def quadratic_ball_prox(radius, center=None, dim=None) -> ProxOracle:
    """h(x) = ||x - c||^2 - r^2; prox shrinks toward the center by 2/3."""
    if radius <= 0:
        raise UsageError("radius must be positive")
    if center is None:
        if dim is None:
            raise UsageError("quadratic ball prox needs a center or a dimension")
        center = np.zeros(int(dim))
    center = as_point(center, name="center")
    return ProxOracle(
        h_eval=lambda w: float(np.sum((as_point(w, center.size) - center) ** 2)) - radius ** 2,
        prox=lambda x: center + (as_point(x, center.size) - center) / 3.0,
        name="quadratic-ball",
    )


def abs_norm_prox(radius, center=None, dim=None) -> ProxOracle:
    """h(x) = ||x - c|| - r; the prox is the block soft threshold at 1."""
    if radius <= 0:
        raise UsageError("radius must be positive")
    if center is None:
        if dim is None:
            raise UsageError("abs-norm prox needs a center or a dimension")
        center = np.zeros(int(dim))
    center = as_point(center, name="center")

    def prox(x):
        d = as_point(x, center.size) - center
        nrm = float(np.linalg.norm(d))
        if nrm <= 1.0:
            return center.copy()
        return center + (1.0 - 1.0 / nrm) * d

    return ProxOracle(
        h_eval=lambda w: float(np.linalg.norm(as_point(w, center.size) - center)) - radius,
        prox=prox,
        name="abs-norm",
    )


def set_distance_prox(project_onto, name="set-distance") -> ProxOracle:
    """Prox oracle whose envelope is half the squared distance to a set.

    h_eval is identically zero, which is only meaningful on the target set;
    the oracle is used exclusively at prox outputs, so the p = 2
    distance-power identity holds exactly.  Not a real-valued convex h, so
    the prox-optimality invariant does not apply to this fixture.
    """
    return ProxOracle(h_eval=lambda w: 0.0, prox=project_onto, name=name)


# ---------------------------------------------------------------------------
# OracleMap adapters for the driver.

def subgradient_projector_oracle(f: LegendreFunction, prob: LevelSetProblem) -> OracleMap:
    return OracleMap(
        apply=lambda z: bregman_subgradient_projector(f, prob, z),
        name=f"subgrad[{prob.name}]",
    )


def classical_subgradient_oracle(prob: LevelSetProblem) -> OracleMap:
    return OracleMap(
        apply=lambda z: classical_subgradient_projector(prob, z),
        name=f"classical-subgrad[{prob.name}]",
    )


def distance_power_oracle(project_onto, p) -> OracleMap:
    if p < 1.0:
        raise UsageError(f"distance power requires p >= 1, got {p}")
    return OracleMap(
        apply=lambda z: distance_power_projector(project_onto, p, z),
        name=f"distpow[p={p:g}]",
    )


def moreau_envelope_oracle(prox: ProxOracle) -> OracleMap:
    return OracleMap(
        apply=lambda z: moreau_projector(prox, z),
        name=f"moreau[{prox.name}]",
    )


def affine_map_oracle(A, b) -> OracleMap:
    """T(x) = A x + b; useful for runs with an empty fixed-point set."""
    b = as_point(b, name="b")
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = np.eye(b.size) * float(A)
    if A.shape != (b.size, b.size):
        raise UsageError(f"affine map needs a ({b.size}, {b.size}) matrix, got {A.shape}")
    return OracleMap(apply=lambda z: A @ as_point(z, b.size) + b, name="affine-map")


def projector_oracle(project_onto, name="projector") -> OracleMap:
    return OracleMap(apply=project_onto, name=name)
