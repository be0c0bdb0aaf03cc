import numpy as np
import pytest

from hamclf import neighbors
from hamclf.lattice import Pattern, all_patterns
from hamclf.neighbors import BACKENDS, IndexedPoints, NoAvailableCases, brute_force_k_nearest, build

P = Pattern.parse
ALL_BACKENDS = sorted(BACKENDS)


@pytest.mark.parametrize("backend", ALL_BACKENDS)
class TestKNearest:
    def test_masked_distance_ignores_other_coordinates(self, backend):
        idx = build(np.array([[0.0, 9.0], [1.0, 0.0], [2.0, -9.0]]), backend=backend)
        assert idx.k_nearest(P("10"), np.array([0.9, 100.0]), 2) == [1, 0]

    def test_k_larger_than_candidates(self, backend):
        idx = build(np.array([[3.0], [1.0], [2.0]]), backend=backend)
        assert idx.k_nearest(P("1"), np.array([0.0]), 10) == [1, 2, 0]

    def test_self_inclusion(self, backend):
        pts = np.array([[0.2, 0.3], [0.5, 0.5], [0.9, 0.1]])
        idx = build(pts, backend=backend)
        assert idx.k_nearest(P("11"), pts[2], 1) == [2]

    def test_ties_by_row_id(self, backend):
        pts = np.array([[1.0, 5.0], [0.0, 0.0], [1.0, 2.0], [-1.0, 1.0], [1.0, 0.0]])
        idx = build(pts, row_ids=[10, 11, 12, 13, 14], backend=backend)
        # x1 = 1 for rows 10, 12, 14 (distance 0), x1 = 0 / -1 further away
        assert idx.k_nearest(P("10"), np.array([1.0, 0.0]), 4) == [10, 12, 14, 11]
        assert idx.k_nearest(P("10"), np.array([0.0, 0.0]), 5) == [11, 10, 12, 13, 14]

    def test_empty_pattern_returns_first_rows(self, backend):
        rng = np.random.default_rng(1)
        idx = build(rng.random((8, 3)), backend=backend)
        assert idx.k_nearest(Pattern.zeros(3), rng.random(3), 4) == [0, 1, 2, 3]

    def test_candidate_subset(self, backend):
        pts = np.array([[0.0], [1.0], [2.0], [3.0]])
        idx = build(pts, backend=backend)
        assert idx.k_nearest(P("1"), np.array([0.1]), 2, candidate_rows=[3, 1]) == [1, 3]

    def test_empty_candidates(self, backend):
        idx = build(np.zeros((0, 2)), d=2, backend=backend)
        assert len(idx) == 0
        with pytest.raises(NoAvailableCases):
            idx.k_nearest(P("11"), np.zeros(2), 1)

    def test_matches_brute_force(self, backend):
        rng = np.random.default_rng(5)
        for d in (1, 2, 3, 4):
            pts = np.round(rng.random((200, d)) * 4) / 4  # many exact ties
            idx = build(pts, backend=backend)
            for w in all_patterns(d):
                for _ in range(20):
                    q = np.round(rng.random(d) * 4) / 4
                    k = int(rng.integers(1, 30))
                    cand = sorted(rng.choice(200, size=int(rng.integers(1, 200)), replace=False).tolist())
                    got = idx.k_nearest(w, q, k, cand)
                    assert got == brute_force_k_nearest(pts, w, q, k, cand)
                    dist = [float(((pts[r] - q)[list(w.coords)] ** 2).sum()) for r in got]
                    assert dist == sorted(dist)
                    assert len(got) == min(k, len(cand))


def test_backends_agree_on_batched_queries():
    if len(ALL_BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(9)
    pts = rng.random((500, 4))
    pts[::7] = pts[3]  # duplicates
    q = np.vstack([rng.random((50, 4)), pts[:20]])
    out = []
    for b in ALL_BACKENDS:
        idx = IndexedPoints(pts, backend=b)
        out.append([idx.k_nearest_positions(w, q, 13, idx.positions(None)) for w in all_patterns(4)])
    for a, b in zip(out[0], out[1]):
        assert np.array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        neighbors.get_backend("kd-tree")


def test_env_override():
    import os
    import subprocess
    import sys
    env = dict(os.environ, HAMCLF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from hamclf import neighbors; print(neighbors.DEFAULT_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
