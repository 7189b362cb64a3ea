"""Brute-force references used by the test suite.

These deliberately share no code path with the projection solver: the grid
scan minimizes the distance by enumeration and the finite-difference
gradient approximates derivatives from function values only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .legendre import LegendreFunction, as_point


@dataclass(frozen=True)
class GridSpec:
    """A box [lo, hi] sampled with `resolution` points per axis, dim <= 2."""

    lo: np.ndarray
    hi: np.ndarray
    resolution: int

    def __post_init__(self):
        lo = as_point(self.lo, name="lo")
        hi = as_point(self.hi, name="hi", dim=lo.size)
        if lo.size > 2:
            raise UsageError("grid oracle supports dimensions 1 and 2 only")
        if not np.all(lo < hi):
            raise UsageError("grid requires lo < hi componentwise")
        if int(self.resolution) < 2:
            raise UsageError("grid resolution must be >= 2")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def dim(self):
        return self.lo.size

    @property
    def spacing(self) -> float:
        return float(np.max((self.hi - self.lo) / (self.resolution - 1)))

    def points(self) -> np.ndarray:
        """All grid points as an (n, dim) array in lexicographic order."""
        axes = [
            np.linspace(self.lo[i], self.hi[i], self.resolution)
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def grid_projection(f: LegendreFunction, membership, x0, grid: GridSpec) -> np.ndarray:
    """Feasible grid point minimizing D(., x0), ties broken lexicographically.

    membership may accept the full (n, dim) array of grid points and return
    a boolean mask; otherwise it is called once per point.  Raises
    UsageError when no grid point is feasible.
    """
    x0 = as_point(x0, f.dim, name="x0")
    if grid.dim != f.dim:
        raise UsageError(f"grid dimension {grid.dim} does not match kernel dimension {f.dim}")
    pts = grid.points()
    mask = None
    try:
        cand = membership(pts)
        arr = np.asarray(cand)
        if arr.dtype == bool and arr.shape == (pts.shape[0],):
            mask = arr
    except Exception:
        mask = None
    if mask is None:
        mask = np.fromiter((bool(membership(p)) for p in pts), dtype=bool, count=pts.shape[0])
    if not mask.any():
        raise UsageError("no grid point is feasible for the given membership test")
    dists = f.eval_batch(pts) - f.eval(x0) - (pts - x0) @ f.grad(x0)
    dists = np.where(mask, dists, np.inf)
    # Points are in lexicographic order and argmin returns the first
    # minimizer, which makes the tie-break deterministic.
    return pts[int(np.argmin(dists))].copy()


def fd_gradient(fn, x, step) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    if step <= 0:
        raise UsageError("fd_gradient requires step > 0")
    x = as_point(x, name="x")
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return g
