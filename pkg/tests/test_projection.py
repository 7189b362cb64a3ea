import math

import numpy as np
import pytest

from bregproj import (CutSet, DomainError, Halfspace, InfeasibilityReport,
                      InnerSettings, NonconvergenceError, UsageError,
                      box_halfspaces, bregman_distance, make_legendre,
                      project_cutset, project_halfspace,
                      three_point_residual, universal_set,
                      variational_residual)
from bregproj.oracle import GridSpec, grid_projection
from bregproj.projection import solve_halfspace_multiplier

from conftest import random_nonempty_polytope, sample_feasible


def euclidean_halfspace_projection(a, b, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    v = float(a @ x) - b
    if v <= 0:
        return x.copy()
    return x - (v / float(a @ a)) * a


def test_energy_halfspace_examples():
    f = make_legendre("energy", 2)
    hs = Halfspace(np.array([1.0, 0.0]), 0.0)
    out = project_halfspace(f, hs, [2.0, 3.0])
    assert np.allclose(out, [0.0, 3.0], atol=1e-12)
    lam = solve_halfspace_multiplier(f, hs, f.grad(np.array([2.0, 3.0])))
    assert lam == pytest.approx(2.0, abs=1e-12)
    # interior point returned unchanged
    hs5 = Halfspace(np.array([1.0, 0.0]), 5.0)
    assert np.array_equal(project_halfspace(f, hs5, [2.0, 3.0]), [2.0, 3.0])


def test_expsum_halfspace_hand_solve():
    f = make_legendre("expsum", 1)
    hs = Halfspace(np.array([1.0]), 0.0)
    out = project_halfspace(f, hs, [1.0])
    assert abs(out[0]) <= 1e-10
    lam = solve_halfspace_multiplier(f, hs, f.grad(np.array([1.0])))
    assert lam == pytest.approx(math.e - 1.0, rel=1e-10)


def test_energy_halfspace_matches_closed_form(rng):
    f = make_legendre("energy", 3)
    for _ in range(100):
        a = rng.standard_normal(3)
        if np.linalg.norm(a) < 1e-3:
            continue
        b = float(rng.uniform(-2, 2))
        hs = Halfspace(a, b)
        x = rng.uniform(-4, 4, 3)
        got = project_halfspace(f, hs, x)
        want = euclidean_halfspace_projection(a, b, x)
        assert np.max(np.abs(got - want)) <= 1e-12 * (1 + np.linalg.norm(x))


def test_halfspace_boundary_accuracy(rng):
    f = make_legendre("expsum", 2)
    for _ in range(50):
        a = rng.uniform(0.2, 2.0, 2)
        b = float(rng.uniform(-1.0, 1.0))
        hs = Halfspace(a, b)
        x = rng.uniform(0.5, 2.0, 2)
        if hs.violation(x) <= 0:
            continue
        out = project_halfspace(f, hs, x, tol=1e-12)
        assert abs(hs.violation(out)) <= 1e-12 * (1.0 + abs(b)) + 1e-14


@pytest.mark.parametrize("name", ["energy", "expsum"])
def test_halfspace_idempotence(rng, name):
    f = make_legendre(name, 2)
    for _ in range(30):
        a = rng.uniform(0.2, 1.5, 2)
        hs = Halfspace(a, float(rng.uniform(-1, 1)))
        x = rng.uniform(-1.5, 1.5, 2)
        once = project_halfspace(f, hs, x)
        twice = project_halfspace(f, hs, once)
        assert np.max(np.abs(twice - once)) <= 1e-10


def test_expsum_unreachable_halfspace_is_domain_error():
    # the root would need the dual point to underflow out of dom f*
    f = make_legendre("expsum", 1)
    hs = Halfspace(np.array([1.0]), -800.0)
    with pytest.raises(DomainError):
        project_halfspace(f, hs, [0.0])


def test_project_cutset_empty_returns_anchor():
    f = make_legendre("energy", 2)
    res = project_cutset(f, universal_set(2), [1.0, 2.0])
    assert np.array_equal(res.point, [1.0, 2.0])
    assert res.multipliers.size == 0
    assert res.inner_iterations == 0


def test_project_cutset_negative_quadrant():
    f = make_legendre("energy", 2)
    cs = CutSet(2, base=[Halfspace(np.array([1.0, 0.0]), 0.0),
                         Halfspace(np.array([0.0, 1.0]), 0.0)])
    res = project_cutset(f, cs, [1.0, 1.0])
    assert np.allclose(res.point, [0.0, 0.0], atol=1e-9)
    assert np.allclose(res.multipliers, [1.0, 1.0], atol=1e-9)


def test_project_cutset_wedge_kkt_hand_solved():
    f = make_legendre("energy", 2)
    cs = CutSet(2, base=[Halfspace(np.array([1.0, 1.0]), 1.0),
                         Halfspace(np.array([1.0, -1.0]), 1.0)])
    res = project_cutset(f, cs, [2.0, 0.0])
    assert np.allclose(res.point, [1.0, 0.0], atol=1e-9)
    assert np.allclose(res.multipliers, [0.5, 0.5], atol=1e-9)
    # grid oracle cross-check
    grid = GridSpec(np.array([-3.0, -3.0]), np.array([3.0, 3.0]), 601)
    gp = grid_projection(f, lambda P: cs.contains_batch(P), [2.0, 0.0], grid)
    assert np.max(np.abs(gp - res.point)) <= 2 * grid.spacing


@pytest.mark.parametrize("name,anchor_box", [("energy", 3.0), ("expsum", 1.5)])
def test_certificates_on_random_polytopes(rng, name, anchor_box):
    f = make_legendre(name, 2)
    for _ in range(15):
        cs, interior = random_nonempty_polytope(2, rng.integers(1, 5), rng)
        if name == "expsum":
            # keep the geometry inside the kernel's comfortable range
            interior = np.clip(interior, -1.0, 1.0)
        x0 = rng.uniform(-anchor_box, anchor_box, 2)
        res = project_cutset(f, cs, x0)
        scale = 1.0 + np.linalg.norm(x0)
        assert res.stationarity_residual <= 1e-9 * scale
        assert res.max_violation <= 1e-9 * scale
        assert res.complementarity_residual <= 1e-9 * scale
        assert np.all(res.multipliers >= 0)
        assert cs.contains(res.point, tol=1e-9)
        probes = sample_feasible(cs, interior, rng, n=100)
        for c in probes[:25]:
            assert three_point_residual(f, c, x0, res.point) >= -1e-8
        assert variational_residual(f, cs, x0, res.point, probes) <= 1e-8


def test_uniqueness_across_inner_initializations(rng):
    f = make_legendre("energy", 2)
    cs, _ = random_nonempty_polytope(2, 4, rng)
    x0 = np.array([2.5, -1.5])
    cold = project_cutset(f, cs, x0)
    for _ in range(5):
        warm = rng.uniform(0.0, 2.0, len(cs))
        again = project_cutset(f, cs, x0, warm_multipliers=warm)
        assert np.max(np.abs(again.point - cold.point)) <= 1e-8


def test_cutset_projection_idempotent(rng):
    f = make_legendre("energy", 2)
    cs, _ = random_nonempty_polytope(2, 3, rng)
    res = project_cutset(f, cs, [3.0, 3.0])
    res2 = project_cutset(f, cs, res.point)
    assert np.max(np.abs(res2.point - res.point)) <= 1e-10


def test_infeasible_interval_detected():
    f = make_legendre("energy", 1)
    cs = CutSet(1, base=[Halfspace(np.array([1.0]), 0.0),
                         Halfspace(np.array([-1.0]), -1.0)])  # z <= 0 and z >= 1
    rep = project_cutset(f, cs, [0.5])
    assert isinstance(rep, InfeasibilityReport)
    assert rep.residual_floor == pytest.approx(0.5, abs=1e-6)
    assert rep.trigger in ("stall-probe", "multiplier-cap")
    assert np.all(rep.witness_multipliers >= 0)


def test_infeasible_without_probe_uses_multiplier_cap():
    f = make_legendre("energy", 1)
    cs = CutSet(1, base=[Halfspace(np.array([1.0]), 0.0),
                         Halfspace(np.array([-1.0]), -1.0)])
    settings = InnerSettings(feasibility_probe=False, lambda_cap=10.0,
                             stall_window=20, max_sweeps=4000)
    rep = project_cutset(f, cs, [0.5], settings)
    assert isinstance(rep, InfeasibilityReport)
    assert rep.trigger == "multiplier-cap"
    assert rep.diverged_multiplier_norm > 10.0


def test_nonconvergence_error_carries_residuals():
    f = make_legendre("energy", 1)
    cs = CutSet(1, base=[Halfspace(np.array([1.0]), 0.0),
                         Halfspace(np.array([-1.0]), -1.0)])
    settings = InnerSettings(feasibility_probe=False, max_sweeps=30,
                             stall_window=100, lambda_cap=1e8)
    with pytest.raises(NonconvergenceError) as exc:
        project_cutset(f, cs, [0.5], settings)
    assert "max_violation" in exc.value.residuals


def test_warm_start_size_check():
    f = make_legendre("energy", 1)
    cs = CutSet(1, base=[Halfspace(np.array([1.0]), 0.0)])
    with pytest.raises(UsageError):
        project_cutset(f, cs, [1.0], warm_multipliers=[1.0, 2.0])


def test_three_point_residual_examples():
    f = make_legendre("energy", 2)
    x = np.array([2.0, 3.0])
    xhat = np.array([0.0, 3.0])
    assert three_point_residual(f, xhat, x, xhat) == pytest.approx(0.0, abs=1e-14)
    # c=(-1,0): 0.5*(9+9) - 0.5*(1+9) - 0.5*4 = 2
    assert three_point_residual(f, [-1.0, 0.0], x, xhat) == pytest.approx(2.0, abs=1e-12)


def test_three_point_residual_randomized(rng):
    f = make_legendre("energy", 2)
    for _ in range(10):
        cs, interior = random_nonempty_polytope(2, 3, rng)
        x0 = rng.uniform(-3, 3, 2)
        res = project_cutset(f, cs, x0)
        for c in sample_feasible(cs, interior, rng, n=30):
            assert three_point_residual(f, c, x0, res.point) >= -1e-9


def test_variational_residual_examples(rng):
    f = make_legendre("energy", 2)
    cs = CutSet(2, base=[Halfspace(np.array([1.0, 0.0]), 0.0)])
    x0 = np.array([2.0, 3.0])
    xhat = np.array([0.0, 3.0])
    assert variational_residual(f, cs, x0, xhat, [xhat]) == pytest.approx(0.0, abs=1e-14)
    probes = [np.array([-abs(rng.uniform(0, 3)), rng.uniform(-3, 3)]) for _ in range(50)]
    assert variational_residual(f, cs, x0, xhat, probes) <= 1e-9
    # a deliberately wrong projection is exposed by a positive value
    wrong = np.array([-1.0, 3.0])
    assert variational_residual(f, cs, x0, wrong, [xhat]) > 0.1


def test_variational_residual_rejects_infeasible_probe():
    f = make_legendre("energy", 2)
    cs = CutSet(2, base=[Halfspace(np.array([1.0, 0.0]), 0.0)])
    with pytest.raises(UsageError):
        variational_residual(f, cs, [2.0, 3.0], [0.0, 3.0], [[1.0, 0.0]])


def test_grid_oracle_agreement_dims_1_2(rng):
    cases = []
    f1 = make_legendre("energy", 1)
    cases.append((f1, CutSet(1, base=[Halfspace(np.array([1.0]), 0.3)]),
                  np.array([2.0]), GridSpec(np.array([-5.0]), np.array([5.0]), 1001)))
    f2 = make_legendre("energy", 2)
    cases.append((f2, CutSet(2, base=box_halfspaces([-1.0, -1.0], [1.0, 1.0])),
                  np.array([2.0, 3.0]), GridSpec(np.array([-5.0, -5.0]), np.array([5.0, 5.0]), 1001)))
    fe = make_legendre("expsum", 1)
    cases.append((fe, CutSet(1, base=[Halfspace(np.array([1.0]), 0.0)]),
                  np.array([1.0]), GridSpec(np.array([-5.0]), np.array([5.0]), 1001)))
    for f, cs, x0, grid in cases:
        res = project_cutset(f, cs, x0)
        gp = grid_projection(f, lambda P: cs.contains_batch(P), x0, grid)
        assert np.max(np.abs(gp - res.point)) <= 2 * grid.spacing
