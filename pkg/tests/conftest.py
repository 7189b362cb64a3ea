import numpy as np
import pytest

from bregproj import CutSet, Halfspace


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def sample_feasible(cs: CutSet, anchor, rng, n=100, spread=2.0, max_tries=20000):
    """Rejection-sample n feasible points near an anchor known to be feasible."""
    anchor = np.asarray(anchor, dtype=float)
    out = [anchor.copy()]
    tries = 0
    while len(out) < n and tries < max_tries:
        cand = anchor + spread * rng.standard_normal(anchor.size)
        tries += 1
        if cs.contains(cand, tol=0.0):
            out.append(cand)
    if len(out) < n:
        # shrink toward the anchor, which stays feasible by convexity
        while len(out) < n:
            t = rng.uniform(0.0, 1.0)
            base = out[rng.integers(0, len(out))]
            out.append(anchor + t * (base - anchor))
    return out[:n]


def random_nonempty_polytope(dim, n_rows, rng, interior_margin=0.5):
    """Random halfspaces all satisfied with margin at a random interior point."""
    p = rng.uniform(-1.0, 1.0, dim)
    rows = []
    for _ in range(n_rows):
        a = rng.standard_normal(dim)
        while np.linalg.norm(a) < 1e-3:
            a = rng.standard_normal(dim)
        b = float(a @ p) + interior_margin + rng.uniform(0.0, 1.5)
        rows.append(Halfspace(a, b))
    return CutSet(dim, base=rows), p
