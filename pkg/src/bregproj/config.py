"""Declarative scenario configs: validation and object construction.

A scenario is a single JSON document:

    {
      "name": "halving",
      "legendre": "energy",              # or "expsum"
      "dim": 1,
      "x0": [1.0],
      "set": "universal",                # or {"halfspaces": [...]} or {"box": {...}}
      "operator": {"kind": "projector", "set": {"halfspace": {"a": [1.0], "b": 0.0}}},
      "tolerances": {"fix": 1e-9, "step": 1e-9},
      "max_iter": 100,
      "divergence_radius": 1e6,
      "inner": {"max_sweeps": 5000, "feas_tol": 1e-9, ...},
      "trace_points": true
    }

Validation errors carry the JSON path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .driver import DriverConfig, OracleMap
from .errors import ConfigError
from .legendre import LegendreFunction, make_legendre
from .projection import InnerSettings
from .sets import CutSet, Halfspace, box_halfspaces

_OPERATOR_KINDS = ("subgrad", "classical-subgrad", "distpow", "moreau",
                   "affine-map", "projector")


@dataclass
class Scenario:
    name: str
    f: LegendreFunction
    dim: int
    x0: np.ndarray
    cutset: CutSet
    oracle: OracleMap | None
    eps_fix: float
    eps_step: float
    max_iter: int
    divergence_radius: float | None
    inner: InnerSettings
    store_points: bool


def _expect(doc, key, path, types, default=None, required=False):
    if key not in doc:
        if required:
            raise ConfigError(f"{path}{key}", "missing required field")
        return default
    val = doc[key]
    if not isinstance(val, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}{key}", f"expected {names}, got {type(val).__name__}")
    return val


def _vector(doc, key, path, dim=None, required=False, default=None):
    raw = _expect(doc, key, path, (list, int, float), default=default, required=required)
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        raw = [raw]
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}{key}", "entries must be numbers") from None
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigError(f"{path}{key}", "must be a flat nonempty list of numbers")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}{key}", "entries must be finite")
    if dim is not None and arr.size != dim:
        raise ConfigError(f"{path}{key}", f"has {arr.size} entries, expected {dim}")
    return arr


def _positive(doc, key, path, default=None, required=False):
    val = _expect(doc, key, path, (int, float), default=default, required=required)
    if val is None:
        return None
    if val <= 0:
        raise ConfigError(f"{path}{key}", "must be positive")
    return float(val)


def _halfspace(spec, dim, path) -> Halfspace:
    if not isinstance(spec, dict):
        raise ConfigError(path, "halfspace must be an object with fields a and b")
    a = _vector(spec, "a", f"{path}.", dim=dim, required=True)
    b = _expect(spec, "b", f"{path}.", (int, float), required=True)
    if float(np.linalg.norm(a)) == 0.0:
        raise ConfigError(f"{path}.a", "normal must be nonzero")
    return Halfspace(a, float(b))


def build_cutset(spec, dim, path="set") -> CutSet:
    """Resolve a base-set spec: "universal", a halfspace list, or a box."""
    if spec is None or spec == "universal":
        return CutSet(dim)
    if not isinstance(spec, dict):
        raise ConfigError(path, 'expected "universal" or an object')
    if "halfspaces" in spec:
        rows = spec["halfspaces"]
        if not isinstance(rows, list):
            raise ConfigError(f"{path}.halfspaces", "expected a list")
        base = [_halfspace(row, dim, f"{path}.halfspaces[{i}]") for i, row in enumerate(rows)]
        return CutSet(dim, base=base)
    if "box" in spec:
        box = spec["box"]
        if not isinstance(box, dict):
            raise ConfigError(f"{path}.box", "expected an object with lo and hi")
        lo = _vector(box, "lo", f"{path}.box.", dim=dim, required=True)
        hi = _vector(box, "hi", f"{path}.box.", dim=dim, required=True)
        if not np.all(lo < hi):
            raise ConfigError(f"{path}.box", "requires lo < hi componentwise")
        return CutSet(dim, base=box_halfspaces(lo, hi))
    raise ConfigError(path, 'unknown set spec; use "universal", "halfspaces", or "box"')


def _euclidean_projector(spec, dim, path):
    """Resolve a target-set spec into an exact orthogonal projector."""
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object naming a halfspace, box, or ball")
    if "halfspace" in spec:
        hs = _halfspace(spec["halfspace"], dim, f"{path}.halfspace")
        return ops.halfspace_projector(hs.a, hs.b)
    if "box" in spec:
        box = spec["box"]
        if not isinstance(box, dict):
            raise ConfigError(f"{path}.box", "expected an object with lo and hi")
        lo = _vector(box, "lo", f"{path}.box.", dim=dim, required=True)
        hi = _vector(box, "hi", f"{path}.box.", dim=dim, required=True)
        if not np.all(lo <= hi):
            raise ConfigError(f"{path}.box", "requires lo <= hi componentwise")
        return ops.box_projector(lo, hi)
    if "ball" in spec:
        ball = spec["ball"]
        if not isinstance(ball, dict):
            raise ConfigError(f"{path}.ball", "expected an object with center and r")
        center = _vector(ball, "center", f"{path}.ball.", dim=dim, required=True)
        r = _positive(ball, "r", f"{path}.ball.", required=True)
        return ops.ball_projector(center, r)
    raise ConfigError(path, "unknown target set; use halfspace, box, or ball")


def build_level_problem(spec, dim, path):
    """Resolve a g-spec / h-spec from the fixture catalog."""
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a kind field")
    kind = _expect(spec, "kind", f"{path}.", str, required=True)
    if kind == "affine":
        a = _vector(spec, "a", f"{path}.", dim=dim, required=True)
        b = _expect(spec, "b", f"{path}.", (int, float), required=True)
        if float(np.linalg.norm(a)) == 0.0:
            raise ConfigError(f"{path}.a", "slope must be nonzero")
        return ops.affine_level(a, float(b))
    if kind == "qball":
        r = _positive(spec, "r", f"{path}.", required=True)
        center = _vector(spec, "center", f"{path}.", dim=dim)
        return ops.quadratic_ball_level(r, center=center, dim=dim)
    if kind == "absnorm":
        r = _positive(spec, "r", f"{path}.", required=True)
        center = _vector(spec, "center", f"{path}.", dim=dim)
        return ops.abs_norm_level(r, center=center, dim=dim)
    if kind == "maxaffine":
        rows = _expect(spec, "rows", f"{path}.", list, required=True)
        parsed = []
        for i, row in enumerate(rows):
            hs = _halfspace(row, dim, f"{path}.rows[{i}]")
            parsed.append((hs.a, hs.b))
        feas = _vector(spec, "feasible_point", f"{path}.", dim=dim)
        return ops.max_affine_level(parsed, feasible_point=feas)
    raise ConfigError(f"{path}.kind",
                      f"unknown function kind {kind!r}; use affine, qball, absnorm, or maxaffine")


def _build_prox(spec, dim, path):
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a kind field")
    kind = _expect(spec, "kind", f"{path}.", str, required=True)
    if kind == "affine":
        a = _vector(spec, "a", f"{path}.", dim=dim, required=True)
        b = _expect(spec, "b", f"{path}.", (int, float), required=True)
        return ops.affine_prox(a, float(b))
    if kind == "qball":
        r = _positive(spec, "r", f"{path}.", required=True)
        center = _vector(spec, "center", f"{path}.", dim=dim)
        return ops.quadratic_ball_prox(r, center=center, dim=dim)
    if kind == "absnorm":
        r = _positive(spec, "r", f"{path}.", required=True)
        center = _vector(spec, "center", f"{path}.", dim=dim)
        return ops.abs_norm_prox(r, center=center, dim=dim)
    if kind == "setdist":
        target = _expect(spec, "set", f"{path}.", dict, required=True)
        return ops.set_distance_prox(_euclidean_projector(target, dim, f"{path}.set"))
    raise ConfigError(f"{path}.kind",
                      f"unknown prox kind {kind!r}; use affine, qball, absnorm, or setdist")


def build_operator(spec, f: LegendreFunction, dim, path="operator") -> OracleMap:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a kind field")
    kind = _expect(spec, "kind", f"{path}.", str, required=True)
    if kind == "subgrad":
        prob = build_level_problem(_expect(spec, "g", f"{path}.", dict, required=True),
                                   dim, f"{path}.g")
        return ops.subgradient_projector_oracle(f, prob)
    if kind == "classical-subgrad":
        prob = build_level_problem(_expect(spec, "g", f"{path}.", dict, required=True),
                                   dim, f"{path}.g")
        return ops.classical_subgradient_oracle(prob)
    if kind == "distpow":
        p = _expect(spec, "p", f"{path}.", (int, float), required=True)
        if p < 1:
            raise ConfigError(f"{path}.p", "must be >= 1")
        target = _expect(spec, "set", f"{path}.", dict, required=True)
        return ops.distance_power_oracle(_euclidean_projector(target, dim, f"{path}.set"), float(p))
    if kind == "moreau":
        prox = _build_prox(_expect(spec, "h", f"{path}.", dict, required=True), dim, f"{path}.h")
        return ops.moreau_envelope_oracle(prox)
    if kind == "affine-map":
        b = _vector(spec, "b", f"{path}.", dim=dim, required=True)
        A = spec.get("A", 1.0)
        try:
            A_arr = np.asarray(A, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.A", "must be a number or a dim x dim matrix") from None
        if A_arr.ndim not in (0, 2) or (A_arr.ndim == 2 and A_arr.shape != (dim, dim)):
            raise ConfigError(f"{path}.A", f"must be a number or a {dim}x{dim} matrix")
        return ops.affine_map_oracle(A_arr, b)
    if kind == "projector":
        target = _expect(spec, "set", f"{path}.", dict, required=True)
        return ops.projector_oracle(_euclidean_projector(target, dim, f"{path}.set"))
    raise ConfigError(f"{path}.kind",
                      f"unknown operator kind {kind!r}; choose from {_OPERATOR_KINDS}")


def build_inner(spec, path="inner") -> InnerSettings:
    s = InnerSettings()
    if spec is None:
        return s
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    known = {
        "max_sweeps": int, "kkt_tol": float, "feas_tol": float, "comp_tol": float,
        "lambda_cap": float, "stall_window": int, "root_tol": float,
        "feasibility_probe": bool,
    }
    for key, val in spec.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown inner-solver setting")
        if known[key] is bool:
            if not isinstance(val, bool):
                raise ConfigError(f"{path}.{key}", "expected a boolean")
            setattr(s, key, val)
        elif known[key] is int:
            if not isinstance(val, int) or val < 1:
                raise ConfigError(f"{path}.{key}", "expected a positive integer")
            setattr(s, key, val)
        else:
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"{path}.{key}", "expected a positive number")
            setattr(s, key, float(val))
    return s


def build_scenario(doc) -> Scenario:
    """Validate a parsed config document and construct its objects.

    The operator is optional so that projection-only configs reuse the same
    schema; a run requires one.
    """
    if not isinstance(doc, dict):
        raise ConfigError("", "config root must be an object")
    name = _expect(doc, "name", "", str, default="scenario")
    legendre = _expect(doc, "legendre", "", str, required=True)
    if legendre not in ("energy", "expsum"):
        raise ConfigError("legendre", f'unknown kernel {legendre!r}; use "energy" or "expsum"')
    dim_raw = _expect(doc, "dim", "", int, required=True)
    if dim_raw < 1:
        raise ConfigError("dim", "must be >= 1")
    f = make_legendre(legendre, dim_raw)
    x0 = _vector(doc, "x0", "", dim=dim_raw, required=True)
    cutset = build_cutset(doc.get("set", "universal"), dim_raw, "set")

    oracle = None
    if "operator" in doc:
        oracle = build_operator(doc["operator"], f, dim_raw, "operator")

    tols = doc.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances", "expected an object")
    eps_fix = _positive(tols, "fix", "tolerances.", default=1e-8)
    eps_step = _positive(tols, "step", "tolerances.", default=1e-8)

    max_iter = _expect(doc, "max_iter", "", int, default=1000)
    if max_iter < 1:
        raise ConfigError("max_iter", "must be >= 1")
    radius = _positive(doc, "divergence_radius", "")
    inner = build_inner(doc.get("inner"), "inner")
    store_points = _expect(doc, "trace_points", "", bool, default=True)

    return Scenario(
        name=name, f=f, dim=dim_raw, x0=x0, cutset=cutset, oracle=oracle,
        eps_fix=eps_fix, eps_step=eps_step, max_iter=max_iter,
        divergence_radius=radius, inner=inner, store_points=store_points,
    )


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None


def driver_config(scn: Scenario, max_iter=None) -> DriverConfig:
    if scn.oracle is None:
        raise ConfigError("operator", "missing required field (a run needs an operator)")
    return DriverConfig(
        f=scn.f,
        oracle=scn.oracle,
        x0=scn.x0,
        cutset=scn.cutset,
        eps_fix=scn.eps_fix,
        eps_step=scn.eps_step,
        max_iter=max_iter if max_iter is not None else scn.max_iter,
        divergence_radius=scn.divergence_radius,
        inner=scn.inner,
        store_points=scn.store_points,
        name=scn.name,
    )
