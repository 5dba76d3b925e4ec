import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcrm import problems as P
from mcrm.derivatives import DERIVATIVE_FREE, EXACT, DerivativeMode, stencil_cost
from mcrm.driver import (STOP_EPS2, CountingProblem, IterationRecord, McrmConfig, StopRule,
                         TraceFormatError, evals_per_inner, initial_inner_index,
                         line_search_accept, preset, run, stop_check, trace_from_json,
                         trace_to_csv, trace_to_json, verify_trace)
from mcrm.errors import ConfigurationError, EvaluationError
from mcrm.harness import draw_start, solve_from, start_rng

# iterates of an independent scalar implementation (closed-form 1-D cubic step)
# on F = x^2 / 2 from x0 = 1 + 1e-4, x1 = 1 with sigma1 = 0.02, alpha = 2
HALF_SQUARE_REF = [1.0, 0.01923788646683766, 7.396235090162406e-06]


def half_square():
    return P.ProblemInstance("half", 1, 1, [lambda x: 0.5 * x[0] ** 2], [-1], [1],
                             [lambda x: np.array(x, dtype=float)], [lambda x: np.eye(1)],
                             convex=True, lipschitz=0.0, f_lower=np.zeros(1))


def record(g_norm=0.0, step_norm=0.0):
    return IterationRecord(1, np.zeros(1), 1.0, None, np.ones(1), np.zeros(1), step_norm, g_norm,
                           None, None, 0, 0)


class TestInnerIndex:
    def test_at_sigma1(self):
        assert initial_inner_index(0.02, 0.02, 2.0) == 1

    def test_double(self):
        assert initial_inner_index(0.04, 0.02, 2.0) == 0

    def test_large(self):
        assert initial_inner_index(0.2, 0.02, 2.0) == 0

    @given(st.floats(1.0, 1e6), st.floats(1e-6, 1.0), st.floats(1.01, 10))
    def test_smallest(self, ratio, sigma1, alpha):
        sigma = ratio * sigma1
        i = initial_inner_index(sigma, sigma1, alpha)
        assert alpha ** (i - 1) * sigma >= sigma1
        assert i == 0 or alpha ** (i - 2) * sigma < sigma1


class TestLineSearch:
    def test_zero_step(self):
        assert line_search_accept([1.0, 2.0], [1.0, 2.0], 0.02, 2.0, 1, 0.0, 0.5)

    def test_accept(self):
        # 0.1 >= 0.02 / 12
        assert line_search_accept([1.0], [0.9], 0.02, 2.0, 0, 1.0, 0.0)

    def test_reject(self):
        # 0.0005 < 0.02 / 12
        assert not line_search_accept([1.0], [0.9995], 0.02, 2.0, 0, 1.0, 0.0)

    def test_every_objective(self):
        assert not line_search_accept([1.0, 1.0], [0.0, 1.0], 0.02, 2.0, 0, 1.0, 0.0)

    def test_nonfinite(self):
        with pytest.raises(EvaluationError):
            line_search_accept([1.0], [np.nan], 0.02, 2.0, 0, 1.0, 0.0)


class TestStopCheck:
    def test_threshold_value(self):
        assert STOP_EPS2 == pytest.approx(1.49e-7, rel=1e-3)
        assert stop_check(record(3.86e-4), StopRule("exact_grad"))
        assert not stop_check(record(3.87e-4), StopRule("exact_grad"))

    def test_zero_gradient(self):
        assert stop_check(record(0.0), StopRule("exact_grad"))

    def test_df_needs_both(self):
        rule = StopRule("df_pair")
        assert not stop_check(record(0.0, step_norm=1.0), rule)
        assert stop_check(record(rule.eps, step_norm=math.sqrt(rule.eps)), rule)

    def test_rejects(self):
        with pytest.raises(ValueError):
            StopRule("other")
        with pytest.raises(ValueError):
            StopRule("exact_grad", 0.0)


class TestConfig:
    def test_defaults(self):
        c = McrmConfig()
        assert (c.sigma1, c.alpha, c.beta, c.max_inner) == (2e-2, 2.0, 0.5, 60)

    def test_presets(self):
        assert preset("exact").subsolver.theta_mode == "absolute"
        assert preset("exact").subsolver.theta == 1e-8
        assert preset("inexact").subsolver.theta == 0.9
        df = preset("df")
        assert df.mode == DERIVATIVE_FREE and df.stop_rule.kind == "df_pair" and df.beta == 0.5
        with pytest.raises(ConfigurationError):
            preset("fast")

    def test_dict_roundtrip(self):
        c = preset("df")
        assert McrmConfig.from_dict(c.to_dict()) == c

    def test_string_overrides(self):
        c = McrmConfig.from_dict({"sigma1": "0.5", "theta_mode": "absolute", "theta": "1e-6",
                                  "hessian_mode": "from_gradients_central", "h_floor": "none"})
        assert c.sigma1 == 0.5 and c.subsolver.theta == 1e-6 and c.h_floor is None
        assert c.mode == DerivativeMode("exact", "from_gradients_central")

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="bogus"):
            McrmConfig.from_dict({"bogus": 1})

    @pytest.mark.parametrize("kwargs", [dict(sigma1=0.0), dict(alpha=1.0), dict(max_outer=0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            McrmConfig(**kwargs)


class TestRun:
    def test_half_square_reference(self):
        res = run(half_square(), preset("exact"), np.array([1 + 1e-4]), np.array([1.0]))
        assert res.status == "converged"
        assert res.outer_iterations == len(HALF_SQUARE_REF) - 1 <= 15
        np.testing.assert_allclose([r.x[0] for r in res.trace], HALF_SQUARE_REF, rtol=1e-8)
        assert all(r.sigma == 0.02 for r in res.trace)
        assert res.final.g_norm ** 2 <= STOP_EPS2

    def test_critical_start(self):
        prob = P.get_problem("BK1")
        x1 = np.array([2.0, 2.0])
        res = run(prob, preset("exact"), x1 + 1e-4, x1)
        assert res.status == "converged" and res.outer_iterations == 0
        assert res.final.g_norm <= 1e-12

    def test_bk1_starts(self):
        prob = P.get_problem("BK1")
        eps = math.sqrt(STOP_EPS2)
        for k in range(10):
            x0 = draw_start(prob, start_rng(0, "BK1", k))
            res, sp, _ = solve_from(prob, preset("exact"), x0)
            assert res.status == "converged"
            x, lam, g = res.certificate
            assert g <= eps
            # the recorded measure matches the scaled analytic gradients
            G = np.array([sp.grad(j, x) for j in range(2)])
            assert np.linalg.norm(lam @ G) == pytest.approx(g, rel=1e-12, abs=1e-15)
            t = np.clip(x @ np.array([5.0, 5.0]) / 50, 0, 1)
            assert np.linalg.norm(x - t * np.array([5.0, 5.0])) <= 1e-2

    def test_df_mode(self):
        prob = P.get_problem("BK1")
        res, _, _ = solve_from(prob, preset("df"), P.make_start(prob, 0.3))
        assert res.status == "converged"
        rule = preset("df").stop_rule
        assert res.final.g_norm <= rule.eps and res.final.step_norm ** 2 <= rule.eps

    @pytest.mark.parametrize("mode", ["exact", "inexact", "df"])
    def test_trace_invariants(self, mode):
        config = preset(mode)
        for name in ("CUB2", "Lov1", "DGO1"):
            prob = P.get_problem(name)
            res, sp, _ = solve_from(prob, config, draw_start(prob, start_rng(1, name, 0)))
            assert res.status == "converged", (name, mode)
            tr = res.trace
            for a, b in zip(tr, tr[1:]):
                assert b.sigma == config.alpha ** (a.i_t - 1) * a.sigma
                assert line_search_accept(a.f_values, b.f_values, a.sigma, config.alpha, a.i_t,
                                          b.step_norm, a.step_norm)
                assert b.model_value <= 1e-12
                assert b.residual <= config.subsolver.residual_bound(b.step_norm)
            for r in tr:
                assert r.sigma >= config.sigma1
                assert np.all(r.lambda_ >= 0) and abs(r.lambda_.sum() - 1) <= 1e-12

    def test_deterministic(self):
        prob = P.get_problem("MOP3")
        x0 = draw_start(prob, start_rng(5, "MOP3", 2))
        a, _, _ = solve_from(prob, preset("inexact"), x0)
        b, _, _ = solve_from(prob, preset("inexact"), x0)
        assert a.to_dict() == b.to_dict()

    def test_max_outer(self):
        prob = P.get_problem("FDS")
        config = McrmConfig.from_dict({"max_outer": 1}, preset("exact"))
        res = run(prob, config, np.full(5, 1.5), np.full(5, 1.5) + 1e-4)
        assert res.status == "max_outer_reached" and res.outer_iterations == 1

    def test_evaluation_failure(self):
        # objective blows up past x = 0.5: the first trial point is not finite
        f = lambda x: -x[0] if x[0] < 0.5 else np.inf
        prob = P.ProblemInstance("wall", 1, 1, [f], [-1], [1], [lambda x: -np.ones(1)],
                                 [lambda x: np.zeros((1, 1))])
        res = run(prob, preset("exact"), np.array([-1e-4]), np.zeros(1))
        assert res.status == "evaluation_failure"

    def test_df_requires_distinct_starts(self):
        with pytest.raises(ValueError):
            run(P.get_problem("BK1"), preset("df"), np.ones(2), np.ones(2))

    def test_degenerate_step(self, monkeypatch):
        import mcrm.driver as D
        prob = P.get_problem("CUB2")

        def zero_step(model, config):
            from mcrm.subsolver import certify
            cand = certify(model, model.base, np.array([1.0, 0.0]), config)
            cand.certified = True
            return cand

        monkeypatch.setattr(D, "solve_subproblem", zero_step)
        res = run(prob, preset("df"), np.array([1.0, 1.0]), np.array([1.0, 1.0]) + 1e-4)
        assert res.status == "degenerate_step"
        assert res.final.step_norm == 0.0


class TestCounting:
    def test_counting_wrapper(self):
        cp = CountingProblem(P.get_problem("BK1"))
        cp.value(0, np.zeros(2))
        cp.grad(1, np.zeros(2))
        cp.grad(0, np.zeros(2))
        assert (cp.evals_f, cp.evals_g, cp.evals_h, cp.n) == (1, 2, 0, 2)

    def test_per_inner(self):
        assert evals_per_inner(EXACT, 5, 3) == 6
        n, m = 4, 2
        df = m * (stencil_cost("gradient_central", n) + stencil_cost("hessian_values_cross", n) + 1)
        assert evals_per_inner(DERIVATIVE_FREE, n, m) == df == 2 * (8 + 33 + 1)

    @pytest.mark.parametrize("mode", ["exact", "df"])
    def test_counts_match_inner_iterations(self, mode):
        # counts at record k exclude the derivatives taken at x_k itself
        prob = P.get_problem("CUB2")
        config = preset(mode)
        x0 = np.array([3.0, -2.0])
        res = run(prob, config, x0, P.second_start(x0))
        delta = res.meta["evals_per_inner"]
        inner = res.meta["inner_iterations"]
        recs = res.trace
        for k in range(1, len(recs)):
            used = recs[k].evals_f + recs[k].evals_g - recs[0].evals_f - recs[0].evals_g
            assert used <= delta * sum(inner[:k])
            if mode == "exact":
                # one trial value per objective and inner iteration, one gradient per objective
                # at each of x_1..x_{k}
                assert used == prob.m * (sum(inner[:k]) + k)


class TestVerifyTrace:
    def _run(self, name="BK1", mode="exact", k=0):
        prob = P.get_problem(name)
        res, sp, _ = solve_from(prob, preset(mode), draw_start(prob, start_rng(3, name, k)))
        return res, sp

    def test_quadratic_all_pass(self):
        res, sp = self._run()
        rep = verify_trace(res, L=0.0, f_lower=sp.f_lower)
        assert all(rep[k]["status"] == "pass" for k in rep if k != "rates"), rep
        assert all(r.sigma == 0.02 for r in res.trace)

    def test_cubic_with_constants(self):
        res, sp = self._run("CUB2", "inexact")
        rep = verify_trace(res, L=sp.lipschitz, f_lower=sp.f_lower)
        assert all(rep[k]["status"] == "pass" for k in rep if k != "rates"), rep

    def test_missing_inputs_skip(self):
        res, _ = self._run()
        rep = verify_trace(res)
        assert rep["sigma_upper"]["status"] == "skipped"
        assert rep["step_sum"]["status"] == "skipped"
        assert rep["grad_bound"]["status"] == "skipped"
        assert rep["sigma_lower"]["status"] == "pass"

    def test_truncated_vacuous(self):
        res, sp = self._run()
        res.trace = res.trace[:2]
        rep = verify_trace(res, L=0.0, f_lower=sp.f_lower)
        assert all(rep[k]["status"] in ("pass", "skipped") for k in rep if k != "rates")

    def test_corrupted_sigma(self):
        res, sp = self._run("CUB2")
        res.trace[2].sigma *= 1.5
        rep = verify_trace(res, L=sp.lipschitz, f_lower=sp.f_lower)
        assert rep["sigma_update"]["status"] == "fail"

    def test_df_grad_bound_skipped(self):
        res, sp = self._run(mode="df")
        rep = verify_trace(res, L=0.0, kappas=(0.0, 0.0), f_lower=sp.f_lower)
        assert rep["grad_bound"]["status"] == "skipped"
        assert rep["evaluation_bound"]["status"] == "pass"

    def test_rates(self):
        res, _ = self._run("CUB2")
        rates = verify_trace(res)["rates"]
        assert len(rates) == len(res.trace) - 1


class TestTraceFiles:
    def test_json_roundtrip(self, tmp_path):
        prob = P.get_problem("SP1")
        res, _, _ = solve_from(prob, preset("exact"), P.make_start(prob, 0.4))
        path = tmp_path / "t.json"
        trace_to_json(res, path)
        back = trace_from_json(path)
        assert back.to_dict() == json.loads(json.dumps(res.to_dict()))
        assert verify_trace(back)["line_search"]["status"] == "pass"

    def test_json_errors(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"records": [\n  {"t": 1,}\n]}')
        with pytest.raises(TraceFormatError, match="line 2"):
            trace_from_json(path)
        path.write_text('{"records": [{"t": 1}]}')
        with pytest.raises(TraceFormatError, match="record 0"):
            trace_from_json(path)
        path.write_text("[]")
        with pytest.raises(TraceFormatError):
            trace_from_json(path)

    def test_csv(self, tmp_path):
        prob = P.get_problem("AP1")
        res, _, _ = solve_from(prob, preset("exact"), P.make_start(prob, 0.6))
        path = tmp_path / "t.csv"
        trace_to_csv(res, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,sigma,i_t,step_norm,g_norm,f_1,f_2,f_3,evals_f,evals_g"
        assert len(lines) == len(res.trace) + 1
        last = lines[-1].split(",")
        assert float(last[5]) == res.final.f_values[0]
