import numpy as np
import pytest

from bregproj import CutSet, Halfspace, UsageError, make_legendre
from bregproj.oracle import GridSpec, fd_gradient, grid_projection


def test_gridspec_validation():
    with pytest.raises(UsageError):
        GridSpec(np.array([0.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0]), 11)
    with pytest.raises(UsageError):
        GridSpec(np.array([0.0]), np.array([0.0]), 11)
    with pytest.raises(UsageError):
        GridSpec(np.array([0.0]), np.array([1.0]), 1)


def test_grid_projection_energy_halfspace():
    f = make_legendre("energy", 2)
    cs = CutSet(2, base=[Halfspace(np.array([1.0, 0.0]), 0.0)])
    grid = GridSpec(np.array([-5.0, -5.0]), np.array([5.0, 5.0]), 1001)
    got = grid_projection(f, lambda P: cs.contains_batch(P), [2.0, 3.0], grid)
    assert np.max(np.abs(got - [0.0, 3.0])) <= grid.spacing


def test_grid_projection_unconstrained_returns_nearest_to_anchor():
    f = make_legendre("energy", 2)
    grid = GridSpec(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 41)
    got = grid_projection(f, lambda P: np.ones(P.shape[0], dtype=bool), [0.33, -0.91], grid)
    assert np.max(np.abs(got - [0.3, -0.9])) <= grid.spacing / 2 + 1e-12


def test_grid_projection_expsum_dim1():
    f = make_legendre("expsum", 1)
    cs = CutSet(1, base=[Halfspace(np.array([1.0]), 0.0)])
    grid = GridSpec(np.array([-5.0]), np.array([5.0]), 1001)
    got = grid_projection(f, lambda P: cs.contains_batch(P), [1.0], grid)
    assert abs(got[0]) <= grid.spacing


def test_grid_projection_per_point_membership_fallback():
    f = make_legendre("energy", 1)
    got = grid_projection(f, lambda p: p[0] <= 0.25, [2.0],
                          GridSpec(np.array([-1.0]), np.array([1.0]), 201))
    assert got[0] == pytest.approx(0.25, abs=1e-12)


def test_grid_projection_lexicographic_tie_break():
    f = make_legendre("energy", 2)
    # two symmetric minimizers (-1, 0) and (1, 0); the lexicographically
    # smaller must win
    grid = GridSpec(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 41)
    got = grid_projection(f, lambda P: np.abs(P[:, 0]) >= 1.0, [0.0, 0.0], grid)
    assert np.array_equal(got, [-1.0, 0.0])


def test_grid_projection_no_feasible_point():
    f = make_legendre("energy", 1)
    with pytest.raises(UsageError):
        grid_projection(f, lambda P: np.zeros(P.shape[0], dtype=bool), [0.0],
                        GridSpec(np.array([-1.0]), np.array([1.0]), 11))


def test_fd_gradient_examples():
    f = make_legendre("energy", 2)
    g = fd_gradient(f.eval, np.array([1.0, 2.0]), 1e-5)
    assert np.max(np.abs(g - [1.0, 2.0])) <= 1e-9

    fe = make_legendre("expsum", 1)
    g = fd_gradient(fe.eval, np.array([0.0]), 1e-6)
    assert g[0] == pytest.approx(1.0, abs=1e-9)

    g = fd_gradient(lambda x: x[0] ** 2 - 1.0, np.array([2.0]), 1e-6)
    assert g[0] == pytest.approx(4.0, abs=1e-8)

    with pytest.raises(UsageError):
        fd_gradient(f.eval, np.array([0.0, 0.0]), 0.0)
