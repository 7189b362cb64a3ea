"""Legendre kernels and the Bregman distance they induce.

A kernel here is a function f that is finite, differentiable and strictly
convex on all of R^d and whose conjugate f* has an open domain.  Each
instance exposes the value f, the gradient map grad = grad f, the conjugate
gradient conj_grad = grad f* (the inverse of grad), and a membership
predicate for dom f*.  The induced distance

    D(x, y) = f(x) - f(y) - <grad f(y), x - y>

is nonnegative and vanishes exactly on the diagonal, but is in general
asymmetric and fails the triangle inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

# Library-wide numeric slack.  The theory is exact-arithmetic; these fix the
# tolerances the artifact asserts against.
DISTANCE_SLACK = 1e-12
INVERSE_GRADIENT_TOL = 1e-10

# exp overflows to inf slightly above 709; saturate early and loudly.
EXP_SATURATION = 700.0


def as_point(x, dim=None, name="point"):
    """Validate and return a finite 1-D float64 vector.

    Scalars are promoted to dimension one.  Raises UsageError on NaN/Inf,
    empty input, or a dimension mismatch against ``dim``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size < 1:
        raise UsageError(f"{name} must be a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} has non-finite entries: {arr}")
    if dim is not None and arr.size != dim:
        raise UsageError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


class LegendreFunction:
    """Interface for Legendre kernels on R^d.

    Subclasses implement eval/grad/conj_grad/in_conj_domain.  conj_hess_vec
    is optional; when it returns a vector the halfspace root finder takes
    Newton steps, otherwise it falls back to secant steps.  Instances are
    immutable and safe to share between concurrent evaluations.
    """

    name = "abstract"

    def __init__(self, dim):
        if int(dim) < 1:
            raise UsageError(f"dimension must be >= 1, got {dim}")
        self.dim = int(dim)

    def eval(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def conj_grad(self, u) -> np.ndarray:
        raise NotImplementedError

    def in_conj_domain(self, u) -> bool:
        raise NotImplementedError

    def conj_hess_vec(self, u, v):
        """Directional derivative of conj_grad at u along v, or None."""
        return None

    def eval_batch(self, points) -> np.ndarray:
        """Row-wise eval of an (n, dim) array; generic fallback loops."""
        pts = np.asarray(points, dtype=float)
        return np.array([self.eval(p) for p in pts])

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class EnergyFunction(LegendreFunction):
    """f(x) = (1/2)||x||^2; gradient and conjugate gradient are the identity,
    so the induced distance is half the squared Euclidean distance and the
    induced projections are classical orthogonal projections."""

    name = "energy"

    def eval(self, x):
        x = as_point(x, self.dim)
        return 0.5 * float(x @ x)

    def grad(self, x):
        return as_point(x, self.dim).copy()

    def conj_grad(self, u):
        return as_point(u, self.dim, "dual point").copy()

    def in_conj_domain(self, u):
        u = np.asarray(u, dtype=float)
        return bool(np.all(np.isfinite(u)))

    def conj_hess_vec(self, u, v):
        return np.asarray(v, dtype=float).copy()

    def eval_batch(self, points):
        pts = np.asarray(points, dtype=float)
        return 0.5 * np.einsum("ij,ij->i", pts, pts)


class ExpSumFunction(LegendreFunction):
    """f(x) = sum_i exp(x_i); dom f* is the open positive orthant and
    conj_grad(u) = log(u) componentwise.

    Evaluation saturates with a DomainError once any |x_i| exceeds 700 so
    that invariants stay assertable instead of silently producing inf or an
    underflowed gradient that the conjugate gradient cannot invert.
    """

    name = "expsum"

    def _check_range(self, x):
        if np.max(np.abs(x)) > EXP_SATURATION:
            raise DomainError(
                f"expsum evaluation outside safe range: max|x_i| = {np.max(np.abs(x)):.3g} > {EXP_SATURATION:g}"
            )

    def eval(self, x):
        x = as_point(x, self.dim)
        self._check_range(x)
        return float(np.exp(x).sum())

    def grad(self, x):
        x = as_point(x, self.dim)
        self._check_range(x)
        return np.exp(x)

    def conj_grad(self, u):
        u = as_point(u, self.dim, "dual point")
        if not self.in_conj_domain(u):
            raise DomainError(f"dual point outside the positive orthant: {u}")
        return np.log(u)

    def in_conj_domain(self, u):
        u = np.asarray(u, dtype=float)
        return bool(np.all(np.isfinite(u)) and np.all(u > 0.0))

    def conj_hess_vec(self, u, v):
        return np.asarray(v, dtype=float) / np.asarray(u, dtype=float)

    def eval_batch(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.size and np.max(np.abs(pts)) > EXP_SATURATION:
            raise DomainError("expsum batch evaluation outside safe range")
        return np.exp(pts).sum(axis=1)


_INSTANCES = {"energy": EnergyFunction, "expsum": ExpSumFunction}


def make_legendre(name, dim) -> LegendreFunction:
    """Construct a kernel by config name ("energy" or "expsum")."""
    try:
        cls = _INSTANCES[name]
    except KeyError:
        raise UsageError(
            f"unknown legendre kernel {name!r}; choose from {sorted(_INSTANCES)}"
        ) from None
    return cls(dim)


def bregman_distance(f: LegendreFunction, x, y) -> float:
    """D(x, y) = f(x) - f(y) - <grad f(y), x - y>.

    Nonnegative, and zero exactly when x == y by strict convexity.
    """
    x = as_point(x, name="x")
    y = as_point(y, name="y")
    if x.size != y.size:
        raise UsageError(f"dimension mismatch: x has {x.size}, y has {y.size}")
    return f.eval(x) - f.eval(y) - float(f.grad(y) @ (x - y))


@dataclass
class LegendreCheckReport:
    """Diagnostics from check_legendre.

    max_grad_deviation compares grad against central finite differences of
    eval; max_inverse_gap measures ||conj_grad(grad(x)) - x||.  Samples that
    cannot be evaluated (range overflow) are recorded in failures and do not
    abort the check.
    """

    max_grad_deviation: float
    max_inverse_gap: float
    samples_checked: int
    failures: list = field(default_factory=list)
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            self.samples_checked > 0
            and self.max_grad_deviation <= self.tol
            and self.max_inverse_gap <= self.tol
        )


def check_legendre(f: LegendreFunction, samples, step, tol) -> LegendreCheckReport:
    """Sanity-check a kernel instance against its own definition.

    For each sample x this compares grad(x) with a central finite difference
    of eval at step ``step``, checks grad(x) lies in dom f*, and measures the
    inverse-gradient gap ||conj_grad(grad(x)) - x||.  Passes when both maxima
    are at most ``tol``.
    """
    if step <= 0 or tol <= 0:
        raise UsageError("check_legendre requires step > 0 and tol > 0")
    from .oracle import fd_gradient  # local import: oracle depends on this module

    max_dev = 0.0
    max_gap = 0.0
    checked = 0
    failures = []
    for k, raw in enumerate(samples):
        try:
            x = as_point(raw, f.dim, name=f"sample[{k}]")
            g = f.grad(x)
            fd = fd_gradient(f.eval, x, step)
            if not f.in_conj_domain(g):
                failures.append(f"sample[{k}]: grad(x) is outside dom f*")
                continue
            inv = f.conj_grad(g)
        except DomainError as exc:
            failures.append(f"sample[{k}]: {exc}")
            continue
        max_dev = max(max_dev, float(np.max(np.abs(g - fd))))
        max_gap = max(max_gap, float(np.max(np.abs(inv - x))))
        checked += 1
    return LegendreCheckReport(
        max_grad_deviation=max_dev,
        max_inverse_gap=max_gap,
        samples_checked=checked,
        failures=failures,
        tol=tol,
    )
