"""Outer loop of the multiobjective cubic regularization method.

One outer iteration ``t`` starts from the smallest inner index ``i >= 0``
with ``alpha**(i-1) * sigma_t >= sigma1`` and repeats

1. derivative approximations at ``x_t`` for index ``i``,
2. an approximate KKT pair of the cubic min-max model with weight
   ``alpha**i * sigma_t``,
3. the nonmonotone acceptance test,

raising ``i`` on rejection.  On acceptance ``sigma_{t+1} = alpha**(i-1) * sigma_t``.
Every accepted iterate is recorded so that the run can be re-checked later
with :func:`verify_trace`.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .derivatives import (DERIVATIVE_FREE, EXACT, DerivativeMode, StepRule, build_bundle,
                          stencil_cost)
from .errors import (ConfigurationError, DegenerateStepError, EvaluationError, McrmError,
                     SubsolverError)
from .model import CubicModel, min_norm_weights
from .problems import evaluate
from .subsolver import SubsolverConfig, solve_subproblem

# threshold on the squared criticality measure: 10 * sqrt(eps) with eps = 2**-52
STOP_EPS2 = 10 * 2.0**-26

STATUSES = ("converged", "max_outer_reached", "subsolver_failure", "evaluation_failure",
            "degenerate_step")


@dataclass(frozen=True)
class StopRule:
    """``exact_grad``: ``g**2 <= eps2``.  ``df_pair``: ``g <= eps`` and ``step**2 <= eps``."""

    kind: str = "exact_grad"
    eps2: float = STOP_EPS2

    def __post_init__(self):
        if self.kind not in ("exact_grad", "df_pair"):
            raise ValueError("stop rule must be 'exact_grad' or 'df_pair'")
        if not self.eps2 > 0:
            raise ValueError("eps2 must be positive")

    @property
    def eps(self):
        return math.sqrt(self.eps2)


@dataclass(frozen=True)
class McrmConfig:
    sigma1: float = 2e-2
    alpha: float = 2.0
    subsolver: SubsolverConfig = SubsolverConfig()
    mode: DerivativeMode = EXACT
    beta: float = 0.5
    h_floor: Optional[float] = None
    max_outer: int = 1000
    max_inner: int = 60
    stop_rule: StopRule = StopRule()

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise ValueError("sigma1 must be positive")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("max_outer and max_inner must be positive")

    @property
    def step_rule(self):
        return StepRule(self.beta, self.alpha, self.h_floor)

    def to_dict(self):
        """Flat key/value form using the configuration-file key names."""
        return {
            "sigma1": self.sigma1,
            "alpha": self.alpha,
            "theta": self.subsolver.theta,
            "theta_mode": self.subsolver.theta_mode,
            "subsolver_max_steps": self.subsolver.max_inner_steps,
            "subsolver_restarts": self.subsolver.restarts,
            "gradient_mode": self.mode.gradient_mode,
            "hessian_mode": self.mode.hessian_mode,
            "beta": self.beta,
            "h_floor": self.h_floor,
            "max_outer": self.max_outer,
            "max_inner": self.max_inner,
            "stop_rule": self.stop_rule.kind,
            "stop_eps2": self.stop_rule.eps2,
        }

    @classmethod
    def from_dict(cls, d, base=None):
        """Build a config from flat keys; unknown keys are rejected."""
        base = cls() if base is None else base
        cur = base.to_dict()
        unknown = set(d) - set(cur)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cur.update(d)
        return cls(
            sigma1=float(cur["sigma1"]),
            alpha=float(cur["alpha"]),
            subsolver=replace(base.subsolver, theta=float(cur["theta"]),
                              theta_mode=str(cur["theta_mode"]),
                              max_inner_steps=int(cur["subsolver_max_steps"]),
                              restarts=int(cur["subsolver_restarts"])),
            mode=DerivativeMode(str(cur["gradient_mode"]), str(cur["hessian_mode"])),
            beta=float(cur["beta"]),
            h_floor=None if cur["h_floor"] in (None, "", "none", "None") else float(cur["h_floor"]),
            max_outer=int(cur["max_outer"]),
            max_inner=int(cur["max_inner"]),
            stop_rule=StopRule(str(cur["stop_rule"]), float(cur["stop_eps2"])),
        )


def preset(name):
    """Named configurations: ``exact``, ``inexact`` and ``df``."""
    if name == "exact":
        return McrmConfig(subsolver=SubsolverConfig(theta=1e-8, theta_mode="absolute"))
    if name == "inexact":
        return McrmConfig(subsolver=SubsolverConfig(theta=0.9, theta_mode="relative"))
    if name == "df":
        return McrmConfig(subsolver=SubsolverConfig(theta=0.9, theta_mode="relative"),
                          mode=DERIVATIVE_FREE, beta=0.5, stop_rule=StopRule("df_pair"))
    raise ConfigurationError(f"unknown mode {name!r}; choose exact, inexact or df")


@dataclass
class IterationRecord:
    t: int
    x: np.ndarray
    sigma: float
    i_t: Optional[int]
    lambda_: np.ndarray
    f_values: np.ndarray
    step_norm: float
    g_norm: float
    residual: Optional[float]
    model_value: Optional[float]
    evals_f: int
    evals_g: int
    evals_h: int = 0

    def to_dict(self):
        return {
            "t": self.t,
            "x": [float(v) for v in self.x],
            "sigma": self.sigma,
            "i_t": self.i_t,
            "lambda": [float(v) for v in self.lambda_],
            "f_values": [float(v) for v in self.f_values],
            "step_norm": self.step_norm,
            "g_norm": self.g_norm,
            "residual": self.residual,
            "model_value": self.model_value,
            "evals_f": self.evals_f,
            "evals_g": self.evals_g,
            "evals_h": self.evals_h,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            t=int(d["t"]), x=np.array(d["x"], dtype=float), sigma=float(d["sigma"]),
            i_t=None if d["i_t"] is None else int(d["i_t"]),
            lambda_=np.array(d["lambda"], dtype=float),
            f_values=np.array(d["f_values"], dtype=float),
            step_norm=float(d["step_norm"]), g_norm=float(d["g_norm"]),
            residual=None if d.get("residual") is None else float(d["residual"]),
            model_value=None if d.get("model_value") is None else float(d["model_value"]),
            evals_f=int(d["evals_f"]), evals_g=int(d["evals_g"]),
            evals_h=int(d.get("evals_h", 0)),
        )


@dataclass
class RunResult:
    status: str
    trace: List[IterationRecord]
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.trace[-1]

    @property
    def certificate(self):
        """``(x, lambda, ||sum_j lambda_j grad F_j(x)||)`` at the final record."""
        r = self.final
        return r.x, r.lambda_, r.g_norm

    @property
    def outer_iterations(self):
        return len(self.trace) - 1

    def to_dict(self):
        return {"status": self.status, "meta": self.meta,
                "records": [r.to_dict() for r in self.trace]}


# ---------------------------------------------------------------------------
# evaluation counting


class CountingProblem:
    """Wraps a problem and counts scalar value, gradient and Hessian calls."""

    def __init__(self, problem):
        self.problem = problem
        self.evals_f = self.evals_g = self.evals_h = 0

    def __getattr__(self, name):
        return getattr(self.problem, name)

    def value(self, j, x):
        self.evals_f += 1
        return self.problem.value(j, x)

    def grad(self, j, x):
        self.evals_g += 1
        return self.problem.grad(j, x)

    def hess(self, j, x):
        self.evals_h += 1
        return self.problem.hess(j, x)


def evals_per_inner(mode, n, m):
    """Value plus gradient evaluations spent by one inner iteration.

    For exact derivatives this counts the gradients once per inner
    iteration although they are computed once per outer iteration.
    """
    f = g = 0
    gm, hm = mode.gradient_mode, mode.hessian_mode
    if gm == "exact":
        g += 1
    elif gm == "central_fd":
        f += stencil_cost("gradient_central", n)
    else:
        f += stencil_cost("gradient_onesided", n)
    if hm in ("from_gradients_forward", "from_gradients_backward"):
        # the base gradient is shared when gradients are exact
        g += stencil_cost("hessian_gradients_onesided", n) - (1 if gm == "exact" else 0)
    elif hm == "from_gradients_central":
        g += stencil_cost("hessian_gradients_central", n)
    elif hm == "from_values_cross":
        f += stencil_cost("hessian_values_cross", n)
    elif hm == "from_values_forward":
        f += stencil_cost("hessian_values_forward", n)
    return m * (f + 1 + g)


# ---------------------------------------------------------------------------
# elementary steps


def initial_inner_index(sigma_t, sigma1, alpha):
    """Smallest ``i >= 0`` with ``alpha**(i-1) * sigma_t >= sigma1``."""
    i = 0
    while alpha ** (i - 1) * sigma_t < sigma1:
        i += 1
    return i


def line_search_accept(f_old, f_new, sigma_t, alpha, i, new_step_norm, prev_step_norm):
    """Nonmonotone test: for every j,
    ``F_j(x_t) - F_j(x+) >= alpha**i sigma_t/12 ||x+ - x_t||^3 - sigma_t/12 ||x_t - x_{t-1}||^3``.
    """
    f_old = np.asarray(f_old, dtype=float)
    f_new = np.asarray(f_new, dtype=float)
    if not (np.all(np.isfinite(f_old)) and np.all(np.isfinite(f_new))
            and np.isfinite(new_step_norm) and np.isfinite(prev_step_norm)):
        raise EvaluationError("non-finite value in acceptance test")
    rhs = alpha**i * sigma_t / 12 * new_step_norm**3 - sigma_t / 12 * prev_step_norm**3
    return bool(np.all(f_old - f_new >= rhs))


def stop_check(record, rule):
    if rule.kind == "exact_grad":
        return record.g_norm**2 <= rule.eps2
    return record.g_norm <= rule.eps and record.step_norm**2 <= rule.eps


# ---------------------------------------------------------------------------
# the method


def run(problem, config, x0, x1):
    """Run the method from ``(x0, x1)`` and return a :class:`RunResult`."""
    x0 = np.asarray(x0, dtype=float).reshape(problem.n)
    x1 = np.asarray(x1, dtype=float).reshape(problem.n)
    mode = config.mode
    if not mode.exact and np.array_equal(x0, x1):
        raise ValueError("x0 and x1 must differ when derivatives are approximated")
    cp = CountingProblem(problem)
    rule = config.step_rule
    alpha, sigma1 = config.alpha, config.sigma1
    meta = {
        "problem": problem.name, "n": problem.n, "m": problem.m,
        "x0": [float(v) for v in x0], "config": config.to_dict(),
        "evals_per_inner": evals_per_inner(mode, problem.n, problem.m),
    }
    trace = []

    def snapshot():
        return cp.evals_f, cp.evals_g, cp.evals_h

    def finish(status):
        meta["inner_iterations"] = inner_counts
        return RunResult(status, trace, meta)

    inner_counts = []
    try:
        f_t = evaluate(cp, x1)
    except EvaluationError:
        return RunResult("evaluation_failure", trace, meta)
    ef, eg, eh = snapshot()
    sigma = sigma1
    x_prev, x_t = x0, x1
    step_t = float(np.linalg.norm(x1 - x0))
    i0 = initial_inner_index(sigma, sigma1, alpha)
    try:
        bundle = build_bundle(cp, mode, rule, x_t, x_prev, i0)
    except EvaluationError:
        return RunResult("evaluation_failure", trace, meta)
    except DegenerateStepError:
        return RunResult("degenerate_step", trace, meta)
    lam, g_norm = min_norm_weights(np.array(bundle.gradients))
    trace.append(IterationRecord(1, x_t.copy(), sigma, None, lam, f_t, step_t, g_norm,
                                 None, None, ef, eg, eh))
    if stop_check(trace[-1], config.stop_rule):
        return finish("converged")

    for t in range(1, config.max_outer + 1):
        i = initial_inner_index(sigma, sigma1, alpha)
        accepted = None
        attempts = 0
        while attempts < config.max_inner:
            attempts += 1
            try:
                if bundle is None or (not mode.exact and bundle.inner_index != i):
                    bundle = build_bundle(cp, mode, rule, x_t, x_prev, i)
                model = CubicModel.from_bundle(bundle, alpha**i * sigma)
                try:
                    cand = solve_subproblem(model, config.subsolver)
                except SubsolverError:
                    i += 1
                    continue
                f_new = evaluate(cp, cand.y)
            except EvaluationError:
                inner_counts.append(attempts)
                return finish("evaluation_failure")
            except DegenerateStepError:
                inner_counts.append(attempts)
                return finish("degenerate_step")
            if line_search_accept(f_t, f_new, sigma, alpha, i, cand.step_norm, step_t):
                accepted = cand
                break
            i += 1
        inner_counts.append(attempts)
        if accepted is None:
            return finish("subsolver_failure")

        trace[-1].i_t = i
        sigma = alpha ** (i - 1) * sigma
        old_bundle = bundle
        x_prev, x_t = x_t, accepted.y.copy()
        f_t = f_new
        step_t = accepted.step_norm
        ef, eg, eh = snapshot()
        lam = accepted.weights
        record = IterationRecord(t + 1, x_t.copy(), sigma, None, lam.copy(), f_t, step_t,
                                 np.nan, accepted.residual, accepted.model_value, ef, eg, eh)
        trace.append(record)
        degenerate = step_t == 0 and not mode.exact
        if degenerate:
            # x_{t+1} = x_t: the derivatives just used are the ones at the new point
            bundle = old_bundle
        else:
            try:
                bundle = build_bundle(cp, mode, rule, x_t, x_prev,
                                      initial_inner_index(sigma, sigma1, alpha))
            except EvaluationError:
                record.g_norm = float("nan")
                return finish("evaluation_failure")
        record.g_norm = float(np.linalg.norm(lam @ np.array(bundle.gradients)))
        if stop_check(record, config.stop_rule):
            return finish("converged")
        if degenerate:
            return finish("degenerate_step")
    return finish("max_outer_reached")


# ---------------------------------------------------------------------------
# post-hoc verification


def _relslack(*vals):
    return 1e-12 * (1 + max(abs(float(v)) for v in vals))


def verify_trace(result, L=None, kappas=None, f_lower=None, theta=None):
    """Re-check the inequalities the method guarantees on a finished run.

    Returns a dict mapping check names to ``{"status": "pass"|"fail"|"skipped",
    "detail": str}``, plus ``"rates"`` with the ratios ``g_{t+1} / g_t**2``.
    ``L`` is a Lipschitz constant of the objective Hessians; ``kappas`` the
    error coefficients ``(kappa_G, kappa_H)`` already multiplied by their
    Lipschitz constants (zero is assumed for exact derivatives);
    ``f_lower`` lower bounds on the objectives.  ``theta`` defaults to the
    relative rule's value, or for the absolute rule the largest observed
    ``residual / step**2``.
    """
    recs = result.trace
    cfg = result.meta.get("config", {})
    sigma1 = float(cfg.get("sigma1", recs[0].sigma if recs else 0.0))
    alpha = float(cfg.get("alpha", 2.0))
    exact_mode = cfg.get("gradient_mode", "exact") == "exact" and \
        cfg.get("hessian_mode", "exact") == "exact"
    exact_grad = cfg.get("gradient_mode", "exact") == "exact"
    if kappas is None and exact_mode:
        kappas = (0.0, 0.0)
    report = {}

    def put(name, ok, detail):
        report[name] = {"status": ("pass" if ok else "fail"), "detail": detail}

    def skip(name, why):
        report[name] = {"status": "skipped", "detail": why}

    T = len(recs)
    sig = np.array([r.sigma for r in recs])
    bad = [r.t for r in recs if r.sigma < sigma1]
    put("sigma_lower", not bad, f"sigma_t >= sigma1 on {T} records" if not bad
        else f"violated at t={bad}")

    sigma_max = None
    if L is not None and kappas is not None:
        kG, kH = kappas
        sigma_max = sigma1 + 2 * (L + 3 * alpha * (2 * kG + kH))
        bad = [r.t for r in recs if r.sigma > sigma_max * (1 + 1e-12)]
        put("sigma_upper", not bad, f"max sigma {sig.max():.6g} <= {sigma_max:.6g}"
            if not bad else f"exceeds {sigma_max:.6g} at t={bad}")
    else:
        skip("sigma_upper", "needs L and kappas")

    bad = [recs[k].t for k in range(T - 1)
           if recs[k].i_t is None or recs[k + 1].sigma != alpha ** (recs[k].i_t - 1) * recs[k].sigma]
    put("sigma_update", not bad, "sigma_{t+1} = alpha^(i_t-1) sigma_t on every step"
        if not bad else f"broken at t={bad}")

    bad = []
    for k in range(T - 1):
        a, b = recs[k], recs[k + 1]
        if a.i_t is None or not line_search_accept(a.f_values, b.f_values, a.sigma, alpha, a.i_t,
                                                   b.step_norm, a.step_norm):
            bad.append(a.t)
    put("line_search", not bad, f"{T - 1} accepted steps re-verified" if not bad
        else f"fails at t={bad}")

    bad = [r.t for r in recs if np.any(r.lambda_ < 0) or abs(r.lambda_.sum() - 1) > 1e-12 * r.lambda_.size]
    put("simplex_weights", not bad, "all weights in the simplex" if not bad else f"t={bad}")

    steps3 = np.array([r.step_norm**3 for r in recs])
    if f_lower is not None and T >= 2:
        f_lower = np.asarray(f_lower, dtype=float)
        delta1 = (24 * np.min(recs[0].f_values - f_lower) / ((alpha - 1) * sigma1)
                  + (alpha + 1) / (alpha - 1) * recs[0].step_norm**3)
        worst = max(np.sum(steps3[:k - 1]) for k in range(2, T + 1))
        put("step_sum", worst <= delta1 + _relslack(delta1),
            f"max_T sum ||dx||^3 = {worst:.6g} vs Delta1 = {delta1:.6g}")
        if not exact_grad:
            skip("grad_bound", "recorded criticality uses approximate gradients")
        elif L is None or kappas is None:
            skip("grad_bound", "needs L and kappas")
        else:
            if theta is None:
                if cfg.get("theta_mode", "relative") == "relative":
                    theta = float(cfg.get("theta", 0.9))
                else:
                    ratios = [r.residual / r.step_norm**2 for r in recs[1:]
                              if r.residual is not None and r.step_norm > 0]
                    theta = max(ratios, default=0.0)
                    if any(r.step_norm == 0 and (r.residual or 0) > 0 for r in recs[1:]):
                        theta = np.inf
            kG, kH = kappas
            delta0 = ((L + 2 * theta + (sigma_max + 2 * kG + 2 * kH) * alpha) / 2) ** 1.5
            g = np.array([r.g_norm for r in recs])
            ok = True
            worst_ratio = 0.0
            for k in range(2, T + 1):
                # records 2..k hold g_2..g_k
                ssum = np.sum(g[1:k] ** 1.5)
                bound_sum = delta0 * delta1
                bound_min = (delta0 * delta1 / (k - 1)) ** (2 / 3)
                gmin = g[1:k].min()
                if ssum > bound_sum + _relslack(bound_sum) or gmin > bound_min + _relslack(bound_min):
                    ok = False
                worst_ratio = max(worst_ratio, gmin / bound_min if bound_min > 0 else np.inf)
            put("grad_bound", ok, f"Delta0 = {delta0:.6g}, worst min-g/bound = {worst_ratio:.3g}")
    else:
        skip("step_sum", "needs f_lower and at least two records")
        skip("grad_bound", "needs f_lower, L and kappas")

    if T >= 2:
        bad = []
        s1 = recs[0].step_norm**3
        for k in range(2, T + 1):
            lhs = recs[0].f_values - recs[k - 1].f_values
            rhs = ((alpha - 1) * sigma1 / 12 * np.sum(steps3[1:k])
                   + recs[k - 1].sigma / 12 * steps3[k - 1] - sigma1 / 12 * s1)
            if np.any(lhs < rhs - _relslack(rhs, *recs[0].f_values)):
                bad.append(k)
        put("telescoping", not bad, "descent sums hold for every T" if not bad else f"T={bad}")
    else:
        skip("telescoping", "needs at least two records")

    delta = result.meta.get("evals_per_inner")
    if delta is not None and T >= 2:
        bad = []
        base = recs[0].evals_f + recs[0].evals_g
        for k in range(1, T):
            used = recs[k].evals_f + recs[k].evals_g - base
            bound = delta * (2 * k + math.log(recs[k].sigma, alpha) - math.log(sigma1, alpha))
            if used > bound * (1 + 1e-12):
                bad.append(k)
        put("evaluation_bound", not bad, f"delta = {delta} per inner iteration"
            if not bad else f"exceeded at T={bad}")
    else:
        skip("evaluation_bound", "needs the per-inner evaluation count and two records")

    g = [r.g_norm for r in recs]
    report["rates"] = [g[k + 1] / g[k] ** 2 if g[k] > 0 else float("nan") for k in range(T - 1)]
    return report


# ---------------------------------------------------------------------------
# trace files


class TraceFormatError(McrmError, ValueError):
    pass


def trace_to_json(result, path):
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=1, allow_nan=True)


def trace_from_json(path):
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict) or "records" not in d:
        raise TraceFormatError(f"{path}: expected an object with a 'records' list")
    records = []
    for k, r in enumerate(d["records"]):
        try:
            records.append(IterationRecord.from_dict(r))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"{path}: record {k}: bad or missing field {exc}") from None
    return RunResult(d.get("status", "unknown"), records, d.get("meta", {}))


def trace_to_csv(result, path):
    m = len(result.trace[0].f_values) if result.trace else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sigma", "i_t", "step_norm", "g_norm"]
                   + [f"f_{j + 1}" for j in range(m)] + ["evals_f", "evals_g"])
        for r in result.trace:
            w.writerow([r.t, "%.17g" % r.sigma, "" if r.i_t is None else r.i_t,
                        "%.17g" % r.step_norm, "%.17g" % r.g_norm]
                       + ["%.17g" % v for v in r.f_values] + [r.evals_f, r.evals_g])
