import numpy as np
import pytest

from stagebo.evo import Population, crowding_distance, non_dominated_sort, nsga2


def brute_force_fronts(points):
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    dominated_by = [
        {j for j in range(n) if j != i and np.all(pts[j] >= pts[i]) and np.any(pts[j] > pts[i])}
        for i in range(n)
    ]
    remaining = set(range(n))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining if not (dominated_by[i] & remaining))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def toy(X):
    x = X[:, 0]
    return np.column_stack([-(x**2), -((x - 1.0) ** 2)]), np.zeros(len(X))


def toy_constrained(X):
    objs, _ = toy(X)
    return objs, np.clip(0.5 - X[:, 0], 0.0, None)


class TestNonDominatedSort:
    def test_three_point_chain(self):
        pts = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 1.0]])
        fronts = non_dominated_sort(pts)
        assert [list(f) for f in fronts] == [[0], [2], [1]]

    def test_identical_points_single_front(self):
        pts = np.ones((5, 3))
        fronts = non_dominated_sort(pts)
        assert len(fronts) == 1 and fronts[0].size == 5

    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(0, 1, size=(50, 2))
        fronts = [list(f) for f in non_dominated_sort(pts)]
        assert fronts == brute_force_fronts(pts)

    def test_fronts_partition_indices(self):
        rng = np.random.default_rng(19)
        pts = rng.normal(size=(40, 3))
        fronts = non_dominated_sort(pts)
        flat = np.concatenate(fronts)
        assert sorted(flat) == list(range(40))

    def test_rank_structure(self):
        rng = np.random.default_rng(21)
        pts = rng.normal(size=(30, 2))
        fronts = non_dominated_sort(pts)
        for k in range(1, len(fronts)):
            for i in fronts[k]:
                assert any(
                    np.all(pts[j] >= pts[i]) and np.any(pts[j] > pts[i])
                    for j in fronts[k - 1]
                )

    def test_constraint_domination(self):
        pts = np.array([[5.0, 5.0], [0.0, 0.0], [1.0, 1.0]])
        viol = np.array([2.0, 0.0, 1.0])
        fronts = non_dominated_sort(pts, viol)
        assert list(fronts[0]) == [1]  # feasible beats any violation
        assert list(fronts[1]) == [2]  # lower violation beats higher


class TestCrowdingDistance:
    def test_two_points_infinite(self):
        out = crowding_distance(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.all(np.isinf(out))

    def test_collinear_middle_point(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        out = crowding_distance(pts)
        assert np.isinf(out[0]) and np.isinf(out[2])
        assert out[1] == pytest.approx(2.0)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(31)
        pts = rng.uniform(size=(9, 2))
        base = crowding_distance(pts)
        perm = rng.permutation(9)
        np.testing.assert_allclose(crowding_distance(pts[perm]), base[perm])

    def test_empty_front_rejected(self):
        with pytest.raises(ValueError):
            crowding_distance(np.zeros((0, 2)))


class TestNsga2:
    def test_toy_front_recovered(self):
        pop = nsga2(toy, np.array([[-2.0, 2.0]]), pop=40, gens=30, seed=0)
        xs = pop.individuals[:, 0]
        assert np.all(xs >= -0.05) and np.all(xs <= 1.05)
        f1 = pop.objectives[:, 0]
        assert np.all(f1 >= -1.05) and np.all(f1 <= 1e-6)
        assert f1.min() < -0.8 and f1.max() > -0.2  # spans the front

    def test_constraint_respected(self):
        pop = nsga2(toy_constrained, np.array([[-2.0, 2.0]]), pop=40, gens=30, seed=0)
        assert np.all(pop.individuals[:, 0] >= 0.5 - 1e-6)
        assert np.all(pop.constraint_violation == 0.0)

    def test_deterministic(self):
        kwargs = dict(bounds=np.array([[-2.0, 2.0]]), pop=20, gens=10, seed=99)
        a = nsga2(toy, **kwargs)
        b = nsga2(toy, **kwargs)
        np.testing.assert_array_equal(a.individuals, b.individuals)
        np.testing.assert_array_equal(a.objectives, b.objectives)

    def test_elitism_objective_maxima_never_decrease(self):
        maxima = []
        nsga2(
            toy,
            np.array([[-2.0, 2.0]]),
            pop=24,
            gens=25,
            seed=4,
            generation_hook=lambda gen, objs, viol: maxima.append(objs.max(axis=0)),
        )
        maxima = np.array(maxima)
        assert np.all(np.diff(maxima, axis=0) >= -1e-12)

    def test_front_internally_non_dominated(self):
        pop = nsga2(toy, np.array([[-2.0, 2.0]]), pop=30, gens=15, seed=7)
        objs = pop.objectives
        for i in range(len(objs)):
            for j in range(len(objs)):
                if i != j:
                    assert not (np.all(objs[j] >= objs[i]) and np.any(objs[j] > objs[i]))

    def test_infeasible_problem_returns_least_violating(self):
        def impossible(X):
            objs, _ = toy(X)
            return objs, np.abs(X[:, 0]) + 10.0

        pop = nsga2(impossible, np.array([[-2.0, 2.0]]), pop=20, gens=10, seed=2)
        assert np.all(pop.constraint_violation > 0)
        # Front carries the minimal violation attained.
        assert pop.constraint_violation.max() == pytest.approx(
            pop.constraint_violation.min()
        )

    def test_non_finite_evaluations_quarantined(self):
        def patchy(X):
            objs, viol = toy(X)
            objs = objs.copy()
            objs[X[:, 0] > 0.5] = np.nan
            return objs, viol

        pop = nsga2(patchy, np.array([[-2.0, 2.0]]), pop=30, gens=20, seed=3)
        assert np.all(np.isfinite(pop.objectives))
        assert np.all(pop.individuals[:, 0] <= 0.5 + 1e-9)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            nsga2(toy, np.array([[-2.0, 2.0]]), pop=21, gens=5, seed=0)
        with pytest.raises(ValueError):
            nsga2(toy, np.array([[-2.0, 2.0]]), pop=20, gens=0, seed=0)

    def test_population_container(self):
        pop = nsga2(toy, np.array([[-2.0, 2.0]]), pop=16, gens=5, seed=11)
        assert isinstance(pop, Population)
        assert len(pop) == pop.objectives.shape[0]
        assert np.all(pop.rank == 0)
