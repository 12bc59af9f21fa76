import numpy as np
import pytest

from stagebo.exceptions import ConfigError, DomainError, FrontUnavailableError
from stagebo.metrics import non_dominated_mask
from stagebo.problems import (
    catalog,
    evaluate,
    get_problem,
    read_front_csv,
    register_problem,
    true_front,
    with_preference,
    write_front_csv,
)

REQUIRED = ["ZDT1", "ZDT1-d6", "ZDT2", "ZDT3", "DTLZ2", "DTLZ7", "MW7", "CONSTR"]


class TestEvaluate:
    def test_zdt1_origin(self):
        p = get_problem("ZDT1-d6")
        y, g = evaluate(p, np.zeros(6))
        np.testing.assert_allclose(y, [0.0, -1.0])
        assert g.shape == (0,)

    def test_zdt1_first_axis(self):
        p = get_problem("ZDT1-d6")
        y, _ = evaluate(p, np.array([1.0, 0, 0, 0, 0, 0]))
        np.testing.assert_allclose(y, [-1.0, 0.0], atol=1e-12)

    def test_zdt1_hand_value(self):
        # f1 = 0.25, g = 1, f2 = 1 - sqrt(0.25) = 0.5, negated.
        p = get_problem("ZDT1-d6")
        y, _ = evaluate(p, np.array([0.25, 0, 0, 0, 0, 0]))
        np.testing.assert_allclose(y, [-0.25, -0.5])

    def test_out_of_bounds_rejected(self):
        p = get_problem("ZDT1-d6")
        with pytest.raises(DomainError):
            evaluate(p, np.array([1.5, 0, 0, 0, 0, 0]))
        with pytest.raises(DomainError):
            evaluate(p, np.zeros(5))

    def test_negation_convention_spot_checks(self):
        # Values hand-computed from the classical minimization formulations.
        zdt2 = get_problem("ZDT2")
        y, _ = evaluate(zdt2, np.concatenate([[0.5], np.zeros(7)]))
        np.testing.assert_allclose(y, [-0.5, -(1.0 - 0.25)])
        constr = get_problem("CONSTR")
        y, g = evaluate(constr, np.array([0.5, 1.0]))
        np.testing.assert_allclose(y, [-0.5, -4.0])
        np.testing.assert_allclose(g, [1.0 + 4.5 - 6.0, -1.0 + 4.5 - 1.0])
        # ZDT3: f2 = 1 - sqrt(0.25) - 0.25*sin(2.5*pi) = 0.25 at the origin tail.
        y, _ = evaluate(get_problem("ZDT3"), np.array([0.25, 0.0]))
        np.testing.assert_allclose(y, [-0.25, -0.25], atol=1e-12)
        # DTLZ2 at the all-zero angles: f1 = 1, every other objective 0.
        y, _ = evaluate(get_problem("DTLZ2"), np.array([0, 0, 0, 0, 0.5, 0.5]))
        np.testing.assert_allclose(y, [-1.0, 0, 0, 0, 0], atol=1e-12)
        # DTLZ7 at zero: g = 1, h = m, last objective (1+g)*m = 10.
        y, _ = evaluate(get_problem("DTLZ7"), np.zeros(6))
        np.testing.assert_allclose(y, [0, 0, 0, 0, -10.0], atol=1e-12)

    def test_evaluate_is_deterministic(self):
        p = get_problem("DTLZ7")
        x = np.full(6, 0.3)
        y1, _ = evaluate(p, x)
        y2, _ = evaluate(p, x)
        np.testing.assert_array_equal(y1, y2)

    def test_random_inputs_never_error(self):
        rng = np.random.default_rng(0)
        for spec in catalog():
            lo, hi = spec.bounds[:, 0], spec.bounds[:, 1]
            xs = rng.uniform(lo, hi, size=(1000, spec.dim_x))
            for x in xs:
                y, g = evaluate(spec, x)
                assert y.shape == (spec.dim_y,)
                assert g.shape == (spec.dim_c,)
                assert np.all(np.isfinite(y)) and np.all(np.isfinite(g))


class TestTrueFront:
    def test_zdt1_three_points(self):
        front = true_front(get_problem("ZDT1"), 3)
        assert front.provenance == "analytic"
        np.testing.assert_allclose(
            front.points, [[0.0, -1.0], [-0.25, -0.5], [-1.0, 0.0]], atol=1e-12
        )

    def test_zdt2_endpoints(self):
        pts = true_front(get_problem("ZDT2"), 11).points
        assert any(np.allclose(p, [0.0, -1.0]) for p in pts)
        assert any(np.allclose(p, [-1.0, 0.0]) for p in pts)

    def test_dtlz2_unit_sphere(self):
        pts = true_front(get_problem("DTLZ2"), 64).points
        np.testing.assert_allclose(np.sum(pts**2, axis=1), 1.0, atol=1e-9)

    @pytest.mark.parametrize("name", ["ZDT1", "ZDT2", "ZDT3", "DTLZ2", "DTLZ7"])
    def test_analytic_fronts_non_dominated(self, name):
        pts = true_front(get_problem(name), 128).points
        assert non_dominated_mask(pts).all()

    def test_front_matches_evaluations(self):
        # Front points must be reachable: x = (t, 0, ..., 0) attains them.
        p = get_problem("ZDT1-d6")
        for t in (0.0, 0.09, 0.5, 1.0):
            y, _ = evaluate(p, np.concatenate([[t], np.zeros(5)]))
            np.testing.assert_allclose(y, [-t, -(1.0 - np.sqrt(t))], atol=1e-12)

    def test_minimum_points(self):
        with pytest.raises(ValueError):
            true_front(get_problem("ZDT1"), 1)

    def test_no_cache_unavailable(self, tmp_path):
        with pytest.raises(FrontUnavailableError):
            true_front(get_problem("MW7"), 10, cache_dir=tmp_path)

    def test_cached_front_roundtrip(self, tmp_path):
        pts = np.array([[-1.0, -0.25], [-0.5, -0.5]])
        path = tmp_path / "MW7_front.csv"
        write_front_csv(pts, path)
        front = true_front(get_problem("MW7"), 2, cache_dir=tmp_path)
        assert front.provenance == "cached-evolutionary"
        np.testing.assert_allclose(front.points, pts)


class TestCatalog:
    def test_required_problems_present(self):
        names = [p.name for p in catalog()]
        for name in REQUIRED:
            assert name in names

    def test_zdt1_reference_point(self):
        np.testing.assert_allclose(get_problem("ZDT1").reference_point, [-11.0, -11.0])

    def test_mw7_constraints_and_reference(self):
        p = get_problem("MW7")
        assert p.dim_c == 2
        np.testing.assert_allclose(p.reference_point, [-1.2, -1.2])

    def test_zdt3_preference_box(self):
        p = get_problem("ZDT3")
        assert p.preference is not None
        np.testing.assert_allclose(p.reference_point, [-1.0, -1.0])
        # Lower-left / upper-right normalized corners of the default region.
        np.testing.assert_allclose(p.preference[:, 0], [-0.7, -0.6])
        np.testing.assert_allclose(p.preference[:, 1], [-0.2, -0.4])
        assert np.all(p.preference[:, 0] < p.preference[:, 1])

    def test_dimensions(self):
        dims = {p.name: (p.dim_x, p.dim_y, p.dim_c) for p in catalog()}
        assert dims["ZDT1"] == (10, 2, 0)
        assert dims["ZDT2"] == (8, 2, 0)
        assert dims["ZDT3"] == (2, 2, 0)
        assert dims["DTLZ2"] == (6, 5, 0)
        assert dims["DTLZ7"] == (6, 5, 0)
        assert dims["MW7"] == (4, 2, 2)
        assert dims["CONSTR"] == (2, 2, 2)

    def test_unknown_problem(self):
        with pytest.raises(ConfigError):
            get_problem("nope")

    def test_case_insensitive_lookup(self):
        assert get_problem("zdt1").name == "ZDT1"

    def test_register_problem(self, toy_problem):
        register_problem(toy_problem)
        assert get_problem("toy-parabolas").dim_y == 2

    def test_with_preference_override(self):
        p = with_preference(get_problem("ZDT3"), [-0.9, -0.9], [-0.1, -0.1])
        np.testing.assert_allclose(p.preference[:, 0], [-0.9, -0.9])
        with pytest.raises(ConfigError):
            with_preference(get_problem("ZDT3"), [-0.1, -0.1], [-0.9, -0.9])


class TestMW7Geometry:
    def test_front_on_unit_circle_when_distance_is_minimal(self):
        # Distance term is 1 when x3 = 1 - (x2-0.5)^2 and x4 = 1 - (x3-0.5)^2.
        p = get_problem("MW7")
        x1 = 0.42
        x2 = 0.7
        x3 = 1.0 - (x2 - 0.5) ** 2
        x4 = 1.0 - (x3 - 0.5) ** 2
        y, _ = evaluate(p, np.array([x1, x2, x3, x4]))
        assert np.sum(y**2) == pytest.approx(1.0)

    def test_feasible_region_nonempty(self):
        p = get_problem("CONSTR")
        _, g = evaluate(p, np.array([0.7, 1.0]))
        assert np.all(g >= 0)
        p = get_problem("MW7")
        rng = np.random.default_rng(1)
        feasible = 0
        for _ in range(400):
            x = rng.uniform(p.bounds[:, 0], p.bounds[:, 1])
            _, g = evaluate(p, x)
            feasible += bool(np.all(g >= 0))
        assert feasible > 0


class TestFrontCsv:
    def test_round_trip(self, tmp_path):
        pts = np.array([[-0.1, -0.9], [-0.5, -0.5], [-1.0, 0.0]])
        path = tmp_path / "front.csv"
        write_front_csv(pts, path)
        text = path.read_text()
        assert text.splitlines()[0] == "f1,f2"
        np.testing.assert_allclose(read_front_csv(path), pts)

    def test_bad_file_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not,a,front\n")
        with pytest.raises(FrontUnavailableError):
            read_front_csv(path)
