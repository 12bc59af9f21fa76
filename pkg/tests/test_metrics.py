import itertools

import numpy as np
import pytest

from stagebo.metrics import (
    ParetoArchive,
    feasible_ratio,
    fill_distance,
    hypervolume,
    igd,
    igd_plus,
    pareto_filter,
)


def brute_force_filter(points):
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    keep = []
    for i, p in enumerate(pts):
        dominated = False
        for j, q in enumerate(pts):
            if i != j and np.all(q >= p) and np.any(q > p):
                dominated = True
                break
        if not dominated:
            keep.append(p)
    return np.array(sorted(map(tuple, keep)))


def hv_inclusion_exclusion(points, ref):
    """Exact union-of-boxes volume by inclusion-exclusion (<= ~10 points)."""
    ref = np.asarray(ref, dtype=float)
    pts = [np.asarray(p, dtype=float) for p in points if np.all(np.asarray(p) > ref)]
    total = 0.0
    for size in range(1, len(pts) + 1):
        for combo in itertools.combinations(pts, size):
            upper = np.min(np.vstack(combo), axis=0)
            vol = float(np.prod(np.clip(upper - ref, 0.0, None)))
            total += vol if size % 2 == 1 else -vol
    return total


def hv_monte_carlo(points, ref, n_samples, seed):
    rng = np.random.default_rng(seed)
    pts = np.asarray(points, dtype=float)
    ref = np.asarray(ref, dtype=float)
    upper = pts.max(axis=0)
    samples = rng.uniform(ref, upper, size=(n_samples, len(ref)))
    dominated = np.zeros(n_samples, dtype=bool)
    for p in pts:
        dominated |= np.all(samples < p, axis=1)
    return float(np.prod(upper - ref)) * dominated.mean()


class TestParetoFilter:
    def test_simple_domination(self):
        out = pareto_filter([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(out, [[1.0, 1.0]])

    def test_mutually_non_dominated(self):
        pts = [[2.0, 1.0], [1.0, 2.0], [1.5, 1.5]]
        assert pareto_filter(pts).shape[0] == 3

    def test_duplicates_kept_once(self):
        out = pareto_filter([[1.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
        np.testing.assert_array_equal(out, [[1.0, 1.0]])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 1, size=(200, 3))
        mine = np.array(sorted(map(tuple, pareto_filter(pts))))
        np.testing.assert_allclose(mine, brute_force_filter(pts))

    def test_is_subset_and_non_dominated(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(60, 2))
        out = pareto_filter(pts)
        as_set = set(map(tuple, pts))
        for p in out:
            assert tuple(p) in as_set
        for i, p in enumerate(out):
            for j, q in enumerate(out):
                if i != j:
                    assert not (np.all(q >= p) and np.any(q > p))


class TestHypervolume:
    def test_unit_square(self):
        assert hypervolume([[1.0, 1.0]], [0.0, 0.0]) == pytest.approx(1.0)

    def test_two_point_overlap(self):
        assert hypervolume([[2.0, 1.0], [1.0, 2.0]], [0.0, 0.0]) == pytest.approx(3.0)

    def test_dominated_point_adds_nothing(self):
        front = [[2.0, 1.0], [1.0, 2.0], [0.5, 0.5]]
        assert hypervolume(front, [0.0, 0.0]) == pytest.approx(3.0)

    def test_points_below_reference_are_clipped(self):
        assert hypervolume([[1.0, 1.0], [-1.0, 5.0]], [0.0, 0.0]) == pytest.approx(1.0)
        assert hypervolume([[-1.0, -1.0]], [0.0, 0.0]) == 0.0

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_matches_inclusion_exclusion(self, m):
        rng = np.random.default_rng(100 + m)
        for trial in range(8):
            pts = rng.uniform(0.1, 1.0, size=(rng.integers(1, 9), m))
            ref = np.zeros(m)
            expected = hv_inclusion_exclusion(pts, ref)
            assert hypervolume(pts, ref) == pytest.approx(expected, rel=1e-9)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(42)
        pts = rng.uniform(0.2, 1.0, size=(6, 3))
        exact = hypervolume(pts, np.zeros(3))
        approx = hv_monte_carlo(pts, np.zeros(3), n_samples=1_000_000, seed=1)
        assert exact == pytest.approx(approx, rel=5e-3)

    def test_monotone_under_dominating_addition(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pts = rng.uniform(0.1, 1.0, size=(5, 2))
            base = hypervolume(pts, np.zeros(2))
            improved = np.vstack([pts, pts[0] + 0.05])
            assert hypervolume(improved, np.zeros(2)) >= base - 1e-12


class TestDistanceIndicators:
    def test_igd_zero_when_equal(self):
        pts = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert igd(pts, pts) == 0.0

    def test_igd_hand_value(self):
        assert igd([[0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]]) == pytest.approx(
            np.sqrt(2.0) / 2.0
        )

    def test_igd_translation_invariant(self):
        rng = np.random.default_rng(5)
        obs = rng.normal(size=(10, 3))
        ref = rng.normal(size=(15, 3))
        shift = np.array([3.0, -2.0, 0.5])
        assert igd(obs, ref) == pytest.approx(igd(obs + shift, ref + shift))

    def test_igd_plus_zero_when_dominating(self):
        obs = np.array([[2.0, 2.0]])
        ref = np.array([[1.0, 1.0], [0.0, 2.0]])
        assert igd_plus(obs, ref) == 0.0

    def test_igd_plus_hand_value(self):
        assert igd_plus([[0.0, 2.0]], [[1.0, 1.0]]) == pytest.approx(1.0)

    def test_igd_plus_at_most_igd(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            obs = rng.normal(size=(6, 2))
            ref = rng.normal(size=(8, 2))
            assert igd_plus(obs, ref) <= igd(obs, ref) + 1e-12

    def test_fill_distance_hand_value(self):
        assert fill_distance([[0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]]) == pytest.approx(
            np.sqrt(2.0)
        )

    def test_fill_distance_zero_when_covering(self):
        ref = np.array([[0.0, 1.0], [1.0, 0.0]])
        obs = np.vstack([ref, [[0.5, 0.5]]])
        assert fill_distance(obs, ref) == 0.0

    def test_fill_distance_at_least_igd(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            obs = rng.normal(size=(5, 3))
            ref = rng.normal(size=(9, 3))
            assert fill_distance(obs, ref) >= igd(obs, ref) - 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(29)
        obs = rng.normal(size=(7, 2))
        ref = rng.normal(size=(9, 2))
        perm_obs = obs[rng.permutation(7)]
        perm_ref = ref[rng.permutation(9)]
        for fn in (igd, igd_plus, fill_distance):
            assert fn(obs, ref) == pytest.approx(fn(perm_obs, perm_ref))

    def test_empty_sets_rejected(self):
        with pytest.raises(ValueError):
            igd(np.zeros((0, 2)), [[1.0, 1.0]])
        with pytest.raises(ValueError):
            igd_plus([[1.0, 1.0]], np.zeros((0, 2)))
        with pytest.raises(ValueError):
            fill_distance(np.zeros((0, 2)), np.zeros((0, 2)))


class TestFeasibleRatio:
    def test_all_feasible(self):
        archive = ParetoArchive(points=np.zeros((4, 2)))
        assert feasible_ratio(archive) == 1.0

    def test_none_feasible(self):
        archive = ParetoArchive(points=np.zeros((4, 2)), feasible_mask=np.zeros(4, bool))
        assert feasible_ratio(archive) == 0.0

    def test_three_of_four(self):
        mask = np.array([True, True, True, False])
        archive = ParetoArchive(points=np.zeros((4, 2)), feasible_mask=mask)
        assert feasible_ratio(archive) == 0.75

    def test_empty_archive_rejected(self):
        with pytest.raises(ValueError):
            feasible_ratio(ParetoArchive(points=np.zeros((0, 2))))
