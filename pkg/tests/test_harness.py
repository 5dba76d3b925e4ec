import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcrm import harness as Hn
from mcrm import problems as P
from mcrm.driver import preset


def pts_strategy():
    vals = st.integers(0, 6).map(float)
    return st.lists(st.tuples(vals, vals, st.integers(0, 50)), min_size=1, max_size=12)


def make_points(triples):
    return [Hn.FrontPoint(np.zeros(1), np.array([a, b]), 0.0, "converged", s) for a, b, s in triples]


def keyset(front):
    return [(tuple(p.f), p.start_seed) for p in front]


class TestDominance:
    def test_dominates(self):
        assert Hn.dominates(np.array([1.0, 1.0]), np.array([1.0, 2.0]))
        assert not Hn.dominates(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
        assert not Hn.dominates(np.array([0.0, 3.0]), np.array([1.0, 2.0]))

    def test_singleton(self):
        assert len(Hn.dominance_filter(make_points([(1, 2, 0)]))) == 1

    def test_duplicates_keep_lowest_seed(self):
        front = Hn.dominance_filter(make_points([(1, 2, 5), (1, 2, 3), (2, 1, 4)]))
        assert keyset(front) == [((1.0, 2.0), 3), ((2.0, 1.0), 4)]

    @settings(max_examples=100)
    @given(pts_strategy(), st.randoms())
    def test_order_independent_and_idempotent(self, triples, rnd):
        front = Hn.dominance_filter(make_points(triples))
        shuffled = list(triples)
        rnd.shuffle(shuffled)
        assert keyset(Hn.dominance_filter(make_points(shuffled))) == keyset(front)
        assert keyset(Hn.dominance_filter(front)) == keyset(front)
        for p in front:
            assert not any(Hn.dominates(q.f, p.f) for q in front)
        # every input point is dominated by or equal to some retained point
        for a, b, _ in triples:
            f = np.array([a, b])
            assert any(np.all(q.f <= f) for q in front)


class TestKneeAndDistance:
    def test_knee(self):
        F = np.array([[0.0, 1.0], [0.1, 0.2], [0.5, 0.1], [1.0, 0.0]])
        assert Hn.knee_index(F) == 1

    def test_knee_small(self):
        assert Hn.knee_index(np.array([[0.0, 1.0], [1.0, 0.0]])) == 0

    def test_knee_needs_two_objectives(self):
        with pytest.raises(ValueError):
            Hn.knee_index(np.zeros((3, 3)))

    def test_hausdorff(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0]])
        B = np.array([[0.0, 0.0]])
        assert Hn.hausdorff(A, B) == 1.0
        assert Hn.hausdorff(A, A) == 0.0


class TestProfiles:
    def test_single_config(self):
        prof = Hn.performance_profile({"a": [3.0, np.inf, 5.0, 1.0]})
        assert prof["a"][0] == 0.75

    def test_identical_configs(self):
        costs = [2.0, 7.0, np.inf, 1.0]
        prof = Hn.performance_profile({"a": costs, "b": list(costs)})
        np.testing.assert_array_equal(prof["a"], prof["b"])

    def test_ratio(self):
        # ratios: a = (1, 2.5), b = (2, 1)
        prof = Hn.performance_profile({"a": [1.0, 5.0], "b": [2.0, 2.0]}, taus=[1.0, 2.0, 3.0])
        np.testing.assert_array_equal(prof["a"], [0.5, 0.5, 1.0])
        np.testing.assert_array_equal(prof["b"], [0.5, 1.0, 1.0])

    def test_zero_cost(self):
        prof = Hn.performance_profile({"a": [0.0], "b": [1.0]}, taus=[1.0, 10.0])
        np.testing.assert_array_equal(prof["a"], [1.0, 1.0])
        np.testing.assert_array_equal(prof["b"], [0.0, 0.0])

    def test_grid(self):
        assert Hn.TAU_GRID[0] == 1.0 and Hn.TAU_GRID[-1] == 10.0 and len(Hn.TAU_GRID) == 181

    @settings(max_examples=60)
    @given(st.lists(st.lists(st.one_of(st.floats(0.1, 100), st.just(np.inf)), min_size=5, max_size=5),
                    min_size=1, max_size=4))
    def test_monotone_and_limit(self, table):
        costs = {f"c{k}": row for k, row in enumerate(table)}
        taus = list(Hn.TAU_GRID) + [np.inf]
        prof = Hn.performance_profile(costs, taus)
        for k, row in enumerate(table):
            rho = prof[f"c{k}"]
            assert np.all(np.diff(rho) >= 0)
            assert rho[-1] == pytest.approx(np.mean(np.isfinite(row)))

    def test_profile_table(self):
        rows = [
            {"problem": "A", "seed": 0, "config": "x", "status": "converged", "outer_iters": 2},
            {"problem": "A", "seed": 0, "config": "y", "status": "converged", "outer_iters": 4},
            {"problem": "A", "seed": 1, "config": "x", "status": "max_outer_reached", "outer_iters": 9},
            {"problem": "A", "seed": 1, "config": "y", "status": "converged", "outer_iters": 3},
        ]
        tab = Hn.profile_table(rows, "outer_iters", taus=[1.0, 2.0])
        assert tab == [{"metric": "outer_iters", "tau": 1.0, "x": 0.5, "y": 0.5},
                       {"metric": "outer_iters", "tau": 2.0, "x": 0.5, "y": 1.0}]


class TestCsv:
    @settings(max_examples=60)
    @given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                              st.integers(-10**6, 10**6),
                              st.text(alphabet="abc xyz_-", min_size=1, max_size=8)),
                    min_size=1, max_size=10))
    def test_roundtrip(self, tmp_path_factory, data):
        path = tmp_path_factory.mktemp("csv") / "rows.csv"
        rows = [{"f": a, "k": b, "s": c.strip() or "a"} for a, b, c in data]
        Hn.write_csv(path, ["f", "k", "s"], rows)
        back = Hn.read_csv(path)
        assert len(back) == len(rows)
        for r, b in zip(rows, back):
            assert float(b["f"]) == r["f"] and b["k"] == r["k"] and str(b["s"]) == r["s"]

    def test_seventeen_digits(self):
        assert Hn.format_cell(0.1) == "0.10000000000000001"
        assert Hn.format_cell(True) == "True" and Hn.format_cell(None) == ""


class TestCampaign:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            Hn.CampaignSpec([], 1, 0, {})
        with pytest.raises(ValueError):
            Hn.CampaignSpec(["BK1"], 0, 0, {})
        with pytest.raises(KeyError):
            Hn.CampaignSpec(["NOPE"], 1, 0, {})

    def test_start_rng_independent_of_order(self):
        a = Hn.start_rng(1, "BK1", 3).uniform(size=2)
        Hn.start_rng(1, "BK1", 2).uniform(size=2)
        assert np.array_equal(a, Hn.start_rng(1, "bk1", 3).uniform(size=2))
        assert not np.array_equal(a, Hn.start_rng(2, "BK1", 3).uniform(size=2))

    def test_draw_start_inside_box(self):
        prob = P.get_problem("Toi4")
        rng = Hn.start_rng(0, "Toi4", 0)
        for _ in range(20):
            x = Hn.draw_start(prob, rng)
            assert np.all(x > prob.lower) and np.all(x < prob.upper)
        x = Hn.draw_start(prob, rng, scalar_eta=True)
        eta = (x - prob.lower) / (prob.upper - prob.lower)
        assert np.allclose(eta, eta[0])

    def test_rows_sorted_and_parallel_equal(self):
        spec = Hn.CampaignSpec(["SP1", "AP2"], 3, 7, {"exact": preset("exact"),
                                                       "df": preset("df")})
        rows = Hn.run_campaign(spec, jobs=1)
        keys = [(r["problem"], r["config"], r["seed"]) for r in rows]
        assert keys == sorted(keys) and len(rows) == 12
        par = Hn.run_campaign(spec, jobs=2)
        strip = lambda rs: [{k: (v.tolist() if isinstance(v, np.ndarray) else v)
                             for k, v in r.items() if k != "wall_time"} for r in rs]
        assert strip(par) == strip(rows)

    def test_front_reported_in_original_units(self):
        spec = Hn.CampaignSpec(["BK1"], 5, 0, {"exact": preset("exact")})
        rows = Hn.run_campaign(spec)
        prob = P.get_problem("BK1")
        for r in rows:
            np.testing.assert_allclose(r["f"], P.evaluate(prob, r["x"]), rtol=1e-12)

    def test_bk1_front_shape(self):
        spec = Hn.CampaignSpec(["BK1"], 20, 0, {"exact": preset("exact")})
        front = Hn.front_from_rows(Hn.run_campaign(spec))
        F = np.array([p.f for p in front])
        t = np.linspace(0, 1, 2001)
        curve = np.column_stack([50 * t**2, 50 * (1 - t) ** 2])
        # one-sided: recovered points lie on the analytic curve
        assert np.max(np.min(np.linalg.norm(F[:, None] - curve[None], axis=2), axis=1)) <= 1e-1
        rows = Hn.front_rows(front)
        assert list(rows[0])[:2] == ["f_1", "f_2"]


class TestLogisticStudy:
    def test_roles_and_accuracies(self):
        data = P.synthetic_logistic(seed=0)
        front, runs = Hn.logistic_study(data, preset("df"), starts=6, seed=0)
        assert len(runs) == 6 and front
        roles = [p.extra["role"] for p in front]
        assert "min_f1" in roles and "min_f2" in roles
        assert sum(p.extra["knee"] for p in front) == 1
        for p in front:
            assert 0 <= p.extra["train_accuracy"] <= 1 and 0 <= p.extra["test_accuracy"] <= 1
