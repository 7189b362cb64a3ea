"""Halfspaces, bisector cuts, and the accumulated constraint system.

For a kernel f, the set of points at least as close (in the induced
distance) to y as to x is

    {z : D(z, y) <= D(z, x)}
      = {z : <grad f(x) - grad f(y), z> <= f(y) - f(x) + <grad f(x), x> - <grad f(y), y>},

the whole space when x == y and a closed halfspace otherwise.  A CutSet is
a base polyhedron plus the ordered, append-only list of such cuts; the set
it represents only ever shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .legendre import LegendreFunction, as_point


@dataclass(frozen=True)
class Halfspace:
    """{z : <a, z> <= b} with a nonzero normal; stored un-normalized."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = as_point(self.a, name="halfspace normal")
        if float(a @ a) == 0.0:
            raise UsageError("halfspace normal must be nonzero")
        if not np.isfinite(self.b):
            raise UsageError("halfspace offset must be finite")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self):
        return self.a.size

    def violation(self, z) -> float:
        """<a, z> - b; positive outside the halfspace."""
        return float(self.a @ np.asarray(z, dtype=float)) - self.b

    def contains(self, z, tol=1e-9) -> bool:
        """Membership with slack tol * (1 + ||a||), consistent with the
        un-normalized storage convention."""
        return self.violation(z) <= tol * (1.0 + float(np.linalg.norm(self.a)))


@dataclass(frozen=True)
class Cut:
    """Either the whole space (halfspace=None) or one Halfspace."""

    halfspace: Halfspace | None

    @property
    def is_universal(self) -> bool:
        return self.halfspace is None

    @classmethod
    def universal(cls) -> "Cut":
        return cls(None)

    @classmethod
    def of(cls, hs: Halfspace) -> "Cut":
        return cls(hs)


def default_equality_tolerance(x) -> float:
    """Threshold below which two generating points count as equal."""
    return 1e-12 * (1.0 + float(np.linalg.norm(x)))


def build_cut(f: LegendreFunction, x, y, tau_eq=None) -> Cut:
    """Construct the cut generated by the pair (x, y).

    Returns the universal cut when ||x - y|| <= tau_eq (default
    1e-12 * (1 + ||x||)); otherwise the halfspace with normal
    grad f(x) - grad f(y), whose nonvanishing is guaranteed by strict
    convexity.
    """
    x = as_point(x, f.dim, name="x")
    y = as_point(y, f.dim, name="y")
    if tau_eq is None:
        tau_eq = default_equality_tolerance(x)
    if float(np.linalg.norm(x - y)) <= tau_eq:
        return Cut.universal()
    gx = f.grad(x)
    gy = f.grad(y)
    if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
        raise DomainError("non-finite gradient while building a cut")
    a = gx - gy
    b = f.eval(y) - f.eval(x) + float(gx @ x) - float(gy @ y)
    return Cut.of(Halfspace(a, b))


def cut_membership_equiv(f: LegendreFunction, x, y, z, tol=1e-9) -> bool:
    """Check that the distance comparison D(z, y) <= D(z, x) and the linear
    inequality of build_cut classify z the same way, up to slack tol.

    Test helper: the two margins are algebraically identical, so genuine
    disagreement beyond roundoff indicates a broken kernel or cut.
    """
    from .legendre import bregman_distance

    x = as_point(x, f.dim)
    y = as_point(y, f.dim)
    z = as_point(z, f.dim)
    cut = build_cut(f, x, y)
    if cut.is_universal:
        raise UsageError("cut_membership_equiv requires x != y")
    hs = cut.halfspace
    margin_lin = hs.b - float(hs.a @ z)
    margin_dist = bregman_distance(f, z, x) - bregman_distance(f, z, y)
    scale = tol * (1.0 + abs(margin_lin) + abs(margin_dist))
    inside_both = margin_dist >= -scale and margin_lin >= -scale
    outside_both = margin_dist <= scale and margin_lin <= scale
    return inside_both or outside_both


class CutSet:
    """A base list of halfspaces plus the ordered cuts appended per step.

    The represented set is the intersection of the base and every
    non-universal cut.  Appends preserve order; with
    prune_exact_duplicates=True a cut that is literally identical to one
    already stored is skipped (no geometric dominance pruning is done).
    """

    def __init__(self, dim, base=(), prune_exact_duplicates=False):
        self.dim = int(dim)
        if self.dim < 1:
            raise UsageError(f"dimension must be >= 1, got {dim}")
        self.base = []
        for hs in base:
            self._check_dim(hs)
            self.base.append(hs)
        self.cuts = []
        self.prune_exact_duplicates = bool(prune_exact_duplicates)

    def _check_dim(self, hs: Halfspace):
        if hs.dim != self.dim:
            raise UsageError(
                f"halfspace dimension {hs.dim} does not match cut set dimension {self.dim}"
            )

    def append(self, cut: Cut):
        if not cut.is_universal:
            self._check_dim(cut.halfspace)
            if self.prune_exact_duplicates and self._is_duplicate(cut.halfspace):
                return
        self.cuts.append(cut)

    def _is_duplicate(self, hs: Halfspace) -> bool:
        for other in self.halfspaces():
            if other.b == hs.b and np.array_equal(other.a, hs.a):
                return True
        return False

    def halfspaces(self) -> list:
        """Base halfspaces followed by the non-universal cuts, in order."""
        out = list(self.base)
        out.extend(c.halfspace for c in self.cuts if not c.is_universal)
        return out

    def matrix(self):
        """Stacked (A, b) with one row per halfspace; A is (m, dim)."""
        hs = self.halfspaces()
        if not hs:
            return np.zeros((0, self.dim)), np.zeros(0)
        A = np.stack([h.a for h in hs])
        b = np.array([h.b for h in hs])
        return A, b

    def contains(self, z, tol=1e-9) -> bool:
        z = as_point(z, self.dim, name="z")
        return all(h.contains(z, tol) for h in self.halfspaces())

    def contains_batch(self, points, tol=1e-9) -> np.ndarray:
        """Vectorized membership for an (n, dim) array of points."""
        pts = np.asarray(points, dtype=float)
        mask = np.ones(pts.shape[0], dtype=bool)
        for h in self.halfspaces():
            slack = tol * (1.0 + float(np.linalg.norm(h.a)))
            mask &= pts @ h.a <= h.b + slack
        return mask

    def copy(self) -> "CutSet":
        """Immutable-intent snapshot (halfspaces themselves are frozen)."""
        snap = CutSet(self.dim, base=self.base, prune_exact_duplicates=False)
        snap.cuts = list(self.cuts)
        snap.prune_exact_duplicates = self.prune_exact_duplicates
        return snap

    def __len__(self):
        return len(self.halfspaces())

    def __repr__(self):
        return f"CutSet(dim={self.dim}, base={len(self.base)}, cuts={len(self.cuts)})"


def universal_set(dim) -> CutSet:
    """The whole space: a CutSet with no constraints."""
    return CutSet(dim)


def box_halfspaces(lo, hi) -> list:
    """Expand a coordinate box into 2*dim halfspaces."""
    lo = as_point(lo, name="lo")
    hi = as_point(hi, name="hi", dim=lo.size)
    if not np.all(lo < hi):
        raise UsageError("box requires lo < hi componentwise")
    out = []
    dim = lo.size
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        out.append(Halfspace(e, float(hi[i])))
        out.append(Halfspace(-e, -float(lo[i])))
    return out
