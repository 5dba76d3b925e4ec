"""Approximate KKT pairs for the min-max cubic subproblem ``min_y max_j M^j(y)``.

A returned :class:`KktCandidate` ``(y, w)`` satisfies

* ``max_j M^j(y) <= 0``,
* ``w`` in the unit simplex,
* ``||sum_j w_j grad M^j(y)|| <= theta ||y - x||^2`` (relative rule) or
  ``<= tau`` (absolute rule),

and every condition is re-checked through :class:`~mcrm.model.CubicModel`
before the candidate leaves this module.

The search has two phases.  The dual phase maximizes the concave function
``D(w) = min_s sum_j w_j M^j(s)`` over the simplex; each evaluation is a
single weighted cubic minimization, whose minimizer is exactly stationary for
the weights, and a zero duality gap proves global optimality.  When the gap
does not close (nonconvex models), the primal phase descends the smoothed
maximum ``mu log sum_j exp(M^j / mu)`` with decreasing ``mu`` from several warm
starts, then polishes the active set with Newton's method on the KKT system.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import SubsolverError
from .model import min_norm_weights, project_simplex

CERT_SLACK = 1e-12
GAP_TOL = 1e-10


@dataclass(frozen=True)
class SubsolverConfig:
    """Acceptance rule and effort limits.

    ``theta_mode='relative'`` enforces ``residual <= theta * step**2``;
    ``'absolute'`` enforces ``residual <= theta``.  ``smoothing_schedule``
    overrides the automatic ``mu0 * 10**-k`` continuation (4 stages).
    """

    theta: float = 0.9
    theta_mode: str = "relative"
    max_inner_steps: int = 200
    smoothing_schedule: Optional[Tuple[float, ...]] = None
    restarts: int = 0
    inner_tolerance_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.theta_mode not in ("relative", "absolute"):
            raise ValueError("theta_mode must be 'relative' or 'absolute'")
        if self.theta < 0 or (self.theta_mode == "absolute" and self.theta <= 0):
            raise ValueError("need theta >= 0 (relative) or tau > 0 (absolute)")
        if self.smoothing_schedule is not None:
            mus = np.asarray(self.smoothing_schedule, dtype=float)
            if mus.size == 0 or np.any(mus <= 0) or np.any(np.diff(mus) >= 0):
                raise ValueError("smoothing_schedule must be positive and strictly decreasing")
        if self.restarts < 0 or self.max_inner_steps < 1:
            raise ValueError("restarts >= 0 and max_inner_steps >= 1 required")

    def residual_bound(self, step_norm):
        if self.theta_mode == "absolute":
            return self.theta
        return self.theta * step_norm**2 + CERT_SLACK


@dataclass
class KktCandidate:
    y: np.ndarray
    weights: np.ndarray
    model_value: float
    residual: float
    step_norm: float
    certified: bool = False
    gap: float = field(default=np.inf)


# ---------------------------------------------------------------------------
# single weighted cubic


def _cubic_value(g, H, sigma, s):
    return float(g @ s + 0.5 * s @ H @ s + sigma / 6 * np.linalg.norm(s) ** 3)


def weighted_cubic_min(g, H, sigma, maxiter=200):
    """Global minimizer of ``<g,s> + <Hs,s>/2 + sigma/6 ||s||^3``.

    Uses the eigendecomposition of ``H`` and solves ``||s(r)|| = r`` with
    ``s(r) = -(H + sigma r/2 I)^{-1} g`` on the branch where the shifted
    matrix is positive semidefinite.  In the hard case (``g`` orthogonal to
    the leftmost eigenspace) a leftmost eigenvector is added to reach the
    boundary radius.  Returns ``(s, value)`` with ``value <= 0``.
    """
    g = np.asarray(g, dtype=float)
    H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
    n = g.size
    ev, V = np.linalg.eigh(H)
    gh = V.T @ g
    scale = max(1.0, float(np.max(np.abs(ev))), float(np.linalg.norm(g)))
    r_low = max(0.0, -2.0 * ev[0] / sigma)
    if not np.any(gh) and ev[0] >= 0:
        return np.zeros(n), 0.0

    def norm_s(r):
        return float(np.linalg.norm(gh / (ev + 0.5 * sigma * r)))

    # hard case: the leftmost coefficients vanish, so ||s|| stays bounded at r_low
    left = np.abs(ev - ev[0]) <= 1e-12 * scale
    hard = r_low > 0 and np.all(np.abs(gh[left]) <= 1e-14 * scale)
    if hard:
        d = ev[~left] + 0.5 * sigma * r_low
        part = np.zeros(n)
        part[~left] = -gh[~left] / d
        if np.linalg.norm(part) < r_low:
            tau = np.sqrt(r_low**2 - part @ part)
            best = None
            for sign in (1.0, -1.0):
                coef = part.copy()
                coef[np.flatnonzero(left)[0]] = sign * tau
                s = V @ coef
                val = _cubic_value(g, H, sigma, s)
                if best is None or val < best[1]:
                    best = (s, val)
            return best if best[1] <= 0 else (np.zeros(n), 0.0)

    phi = lambda r: norm_s(r) - r
    lo = r_low
    # move just past the pole where the shifted matrix becomes singular
    step = 1e-14 * (1.0 + r_low)
    while True:
        lo = r_low + step
        with np.errstate(divide="ignore", invalid="ignore"):
            val = phi(lo)
        if np.isfinite(val):
            break
        step *= 10
    if val <= 0:
        r = lo
    else:
        hi = max(2 * lo, lo + np.sqrt(2 * np.linalg.norm(g) / sigma) + 1.0)
        while phi(hi) > 0:
            hi *= 2
        try:
            r = optimize.brentq(phi, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                maxiter=maxiter)
        except (RuntimeError, ValueError) as exc:
            raise SubsolverError(f"secular equation did not converge: {exc}") from None
    s = V @ (-gh / (ev + 0.5 * sigma * r))
    val = _cubic_value(g, H, sigma, s)
    if not np.all(np.isfinite(s)) or val > 0:
        return np.zeros(n), 0.0
    return s, val


# ---------------------------------------------------------------------------
# smoothed maximum


def _softmax(vals, mu):
    z = (vals - vals.max()) / mu
    p = np.exp(z)
    return p / p.sum()


def smoothed_value(model, s, mu):
    """``mu * log sum_j exp(M^j(s) / mu)``."""
    vals = model.values_at_step(s)
    top = vals.max()
    return float(top + mu * np.log(np.sum(np.exp((vals - top) / mu))))


def smoothed_gradient(model, s, mu):
    """Gradient of the smoothed maximum and its softmax weights."""
    p = _softmax(model.values_at_step(s), mu)
    return p @ model.gradients_at_step(s), p


def _component_hessians(model, s):
    r = np.linalg.norm(s)
    reg = 0.5 * model.sigma * r * np.eye(model.n)
    if r > 0:
        reg += 0.5 * model.sigma * np.outer(s, s) / r
    return model.H + reg


def smoothed_descent(model, mu, s0, budget):
    """Monotone damped-Newton descent on the smoothed maximum.

    Returns ``(s, w)`` with ``w = softmax(M(s) / mu)``.  The Newton matrix
    has its eigenvalues replaced by their absolute values (floored), so each
    direction is a descent direction and the Armijo backtracking keeps the
    objective nonincreasing.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    s = np.array(s0, dtype=float)
    f = smoothed_value(model, s, mu)
    if not np.isfinite(f):
        raise SubsolverError("non-finite model value in smoothed descent")
    for _ in range(budget):
        G = model.gradients_at_step(s)
        p = _softmax(model.values_at_step(s), mu)
        grad = p @ G
        gnorm = np.linalg.norm(grad)
        if gnorm <= 1e-15 * (1 + np.max(np.abs(G))):
            break
        B = np.einsum("k,kij->ij", p, _component_hessians(model, s))
        B += (G.T * p) @ G / mu - np.outer(grad, grad) / mu
        ev, V = np.linalg.eigh(0.5 * (B + B.T))
        floor = 1e-10 * (1 + np.max(np.abs(ev)))
        d = -V @ ((V.T @ grad) / np.maximum(np.abs(ev), floor))
        slope = grad @ d
        t = 1.0
        for _ in range(60):
            trial = s + t * d
            ft = smoothed_value(model, trial, mu)
            if np.isfinite(ft) and ft <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        if ft >= f:
            break
        s, f = trial, ft
    return s, _softmax(model.values_at_step(s), mu)


# ---------------------------------------------------------------------------
# certification and polishing


def certify(model, y, weights, config):
    """Check the three acceptance conditions; returns a :class:`KktCandidate`."""
    y = np.asarray(y, dtype=float)
    w = project_simplex(np.maximum(np.asarray(weights, dtype=float), 0.0))
    value, _ = model.eval_max(y)
    step = float(np.linalg.norm(y - model.base))
    res = model.kkt_residual(y, w)
    # if the supplied weights fail, the minimum-norm weights may still pass
    if res > config.residual_bound(step):
        w2, _ = min_norm_weights(model.gradients_at_step(y - model.base))
        res2 = model.kkt_residual(y, w2)
        if res2 < res:
            w, res = w2, res2
    ok = value <= 0 and res <= config.residual_bound(step)
    if step == 0:
        ok = ok and res <= config.inner_tolerance_floor
    return KktCandidate(y, w, value, res, step, ok)


def _polish(model, s, w, active, iters=30):
    """Newton's method on the active-set KKT system in ``(s, w_A)``."""
    active = list(active)
    n = model.n
    s = np.array(s, dtype=float)
    lam = np.asarray(w, dtype=float)[active]
    lam = lam / lam.sum() if lam.sum() > 0 else np.full(len(active), 1.0 / len(active))

    def system(s, lam):
        vals = model.values_at_step(s)[active]
        G = model.gradients_at_step(s)[active]
        F = np.concatenate([lam @ G, vals[1:] - vals[0], [lam.sum() - 1.0]])
        return F, vals, G

    F, vals, G = system(s, lam)
    for _ in range(iters):
        k = len(active)
        Hs = _component_hessians(model, s)[active]
        J = np.zeros((n + k, n + k))
        J[:n, :n] = np.einsum("k,kij->ij", lam, Hs)
        J[:n, n:] = G.T
        J[n:n + k - 1, :n] = G[1:] - G[0]
        J[n + k - 1, n:] = 1.0
        delta = np.linalg.lstsq(J, -F, rcond=None)[0]
        norm0 = np.linalg.norm(F)
        t = 1.0
        for _ in range(30):
            s_new, lam_new = s + t * delta[:n], lam + t * delta[n:]
            F_new, vals_new, G_new = system(s_new, lam_new)
            if np.linalg.norm(F_new) < norm0:
                break
            t *= 0.5
        else:
            break
        s, lam, F, vals, G = s_new, lam_new, F_new, vals_new, G_new
        if np.any(lam < 0) and k > 1:
            drop = int(np.argmin(lam))
            active.pop(drop)
            lam = np.delete(lam, drop)
            lam = np.maximum(lam, 0.0)
            lam = lam / lam.sum() if lam.sum() > 0 else np.full(len(active), 1.0 / len(active))
            F, vals, G = system(s, lam)
        if np.linalg.norm(F) <= 1e-15 * (1 + np.abs(vals).max()):
            break
    full = np.zeros(model.m)
    full[active] = np.maximum(lam, 0.0)
    if full.sum() <= 0:
        full[active] = 1.0
    return s, full / full.sum()


# ---------------------------------------------------------------------------
# dual phase


def _dual_point(model, lam):
    lam = np.asarray(lam, dtype=float)
    s, val = weighted_cubic_min(lam @ model.G, np.einsum("k,kij->ij", lam, model.H), model.sigma)
    return s, val


def _dual_two(model):
    """Maximize the dual over ``w = (t, 1 - t)`` by bisection on its derivative."""
    def at(t):
        lam = np.array([t, 1 - t])
        s, dval = _dual_point(model, lam)
        vals = model.values_at_step(s)
        return lam, s, dval, vals[0] - vals[1]

    ends = [at(0.0), at(1.0)]
    if ends[0][3] <= 0:
        return [ends[0]]
    if ends[1][3] >= 0:
        return [ends[1]]
    lo, hi = 0.0, 1.0
    lo_pt, hi_pt = ends
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        pt = at(mid)
        if pt[3] == 0:
            return [pt]
        if pt[3] > 0:
            lo, lo_pt = mid, pt
        else:
            hi, hi_pt = mid, pt
        top = max(abs(lo_pt[3]), abs(hi_pt[3]))
        if top <= 1e-15 * (1 + abs(lo_pt[2])):
            break
    return [lo_pt, hi_pt]


def _dual_general(model):
    m = model.m

    def neg_dual(lam):
        lam = project_simplex(np.maximum(lam, 0))
        s, dval = _dual_point(model, lam)
        return -dval, -model.values_at_step(s)

    best_lam, best_val = None, np.inf
    for lam0 in [np.full(m, 1.0 / m)] + list(np.eye(m)):
        val = neg_dual(lam0)[0]
        if val < best_val:
            best_lam, best_val = lam0, val
    res = optimize.minimize(neg_dual, best_lam, jac=True, method="SLSQP",
                            bounds=[(0, 1)] * m,
                            constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1,
                                          "jac": lambda l: np.ones(m)}],
                            options={"maxiter": 200, "ftol": 1e-15})
    lam = project_simplex(np.maximum(res.x, 0))
    if neg_dual(lam)[0] > best_val:
        lam = best_lam
    s, dval = _dual_point(model, lam)
    return [(lam, s, dval, None)]


# ---------------------------------------------------------------------------
# driver of the two phases


def _better(a, b):
    """True if certified candidate ``a`` should replace ``b``."""
    if b is None:
        return True
    tie = 1e-12 * (1 + abs(b.model_value))
    if a.model_value < b.model_value - tie:
        return True
    return abs(a.model_value - b.model_value) <= tie and a.step_norm < b.step_norm


def solve_subproblem(model, config=SubsolverConfig()):
    """Return a certified approximate KKT pair of ``min_y max_j M^j(y)``.

    Raises :class:`SubsolverError` carrying the best uncertified candidate if
    nothing certifies.
    """
    m, base = model.m, model.base
    best = None
    fallback = None

    def consider(s, w, gap=np.inf):
        nonlocal best, fallback
        cand = certify(model, base + s, w, config)
        cand.gap = gap
        if cand.certified:
            if _better(cand, best):
                best = cand
        elif fallback is None or cand.model_value < fallback.model_value:
            fallback = cand
        return cand

    # the base point itself, certified only when the model is critical there
    consider(np.zeros(model.n), min_norm_weights(model.G)[0])

    if m == 1:
        s, _ = weighted_cubic_min(model.G[0], model.H[0], model.sigma)
        consider(s, np.ones(1), 0.0)
        if best is None:
            raise SubsolverError("single-objective cubic could not be certified", best=fallback)
        return best

    dual_pts = _dual_two(model) if m == 2 else _dual_general(model)
    for lam, s, dval, _ in dual_pts:
        value = float(model.values_at_step(s).max())
        cand = consider(s, lam, value - dval)
        if cand.certified and value - dval <= GAP_TOL * (1 + abs(value)):
            return cand

    # primal phase: smoothed descent from warm starts, then active-set polish
    rng = np.random.default_rng(config.seed)
    weights = [np.eye(m)[j] for j in range(m)] + [np.full(m, 1.0 / m)]
    weights += [rng.dirichlet(np.ones(m)) for _ in range(config.restarts)]
    starts = [_dual_point(model, lam)[0] for lam in weights]
    starts += [s for _, s, _, _ in dual_pts]
    starts.sort(key=lambda s: float(model.values_at_step(s).max()))
    top = float(np.abs(model.values_at_step(starts[0])).max())
    if config.smoothing_schedule is None:
        mu0 = 1e-2 * (1 + top)
        schedule = [mu0 * 10.0**-k for k in range(4)]
    else:
        schedule = list(config.smoothing_schedule)

    budget = config.max_inner_steps
    for s in starts:
        w = None
        for mu in schedule:
            s, w = smoothed_descent(model, mu, s, budget)
            consider(s, w)
        value, active = model.eval_max(base + s)
        near = np.flatnonzero(model.values_at_step(s) >= value - max(10 * schedule[-1], 1e-9))
        s_pol, w_pol = _polish(model, s, w, near)
        consider(s_pol, w_pol)

    if best is None:
        start = fallback.y - base if fallback is not None else starts[0]
        s_epi = _epigraph_solve(model, start, budget)
        if s_epi is not None:
            value = float(model.values_at_step(s_epi).max())
            G = model.gradients_at_step(s_epi)
            near = np.flatnonzero(model.values_at_step(s_epi) >= value - 1e-8 * (1 + abs(value)))
            w0, _ = min_norm_weights(G[near])
            w = np.zeros(m)
            w[near] = w0
            consider(s_epi, w)
            consider(*_polish(model, s_epi, w, near))
    if best is None:
        raise SubsolverError("no candidate satisfies the acceptance conditions", best=fallback)
    return best


def _epigraph_solve(model, s0, budget):
    """Minimize ``gamma`` subject to ``M^j(s) <= gamma`` with SLSQP."""
    n = model.n
    z0 = np.concatenate([s0, [float(model.values_at_step(s0).max())]])
    cons = {
        "type": "ineq",
        "fun": lambda z: z[n] - model.values_at_step(z[:n]),
        "jac": lambda z: np.hstack([-model.gradients_at_step(z[:n]), np.ones((model.m, 1))]),
    }
    res = optimize.minimize(lambda z: z[n], z0, jac=lambda z: np.eye(n + 1)[n], method="SLSQP",
                            constraints=[cons], options={"maxiter": budget, "ftol": 1e-15})
    s = res.x[:n]
    return s if np.all(np.isfinite(s)) else None
