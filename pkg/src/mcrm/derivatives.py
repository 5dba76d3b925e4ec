"""Exact and finite-difference derivative approximations.

Every finite-difference routine takes a plain callable and performs exactly
the number of evaluations reported by :func:`stencil_cost`; shared stencil
points are evaluated once per call.  Hessian approximations are always
returned in the exactly symmetric form ``(A + A.T) / 2``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DegenerateStepError, EvaluationError

GRADIENT_MODES = ("exact", "central_fd", "forward_fd", "backward_fd")
HESSIAN_MODES = (
    "exact",
    "from_gradients_forward",
    "from_gradients_backward",
    "from_gradients_central",
    "from_values_cross",
    "from_values_forward",
)
STEP_CONTEXTS = (
    "alg1_grad_central",
    "alg1_grad_onesided",
    "alg1_hess_grad",
    "alg1_hess_values",
    "alg2_combined",
)


def _checked(f, point, index):
    v = f(point)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise EvaluationError("non-finite value at finite-difference stencil point",
                              index=index, point=point)
    return v if v.ndim else float(v)


def _require_step(h):
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")


def fd_gradient_central(f, x, h, index=None):
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / (2h)``; 2n calls."""
    _require_step(h)
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (_checked(f, x + e, index) - _checked(f, x - e, index)) / (2 * h)
    return g


def fd_gradient_onesided(f, x, h, side="forward", index=None, fx=None):
    """Forward or backward differences; n + 1 calls (n if ``fx`` is given)."""
    _require_step(h)
    if side not in ("forward", "backward"):
        raise ValueError("side must be 'forward' or 'backward'")
    x = np.asarray(x, dtype=float)
    f0 = _checked(f, x, index) if fx is None else float(fx)
    sign = 1.0 if side == "forward" else -1.0
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = sign * h
        g[i] = sign * (_checked(f, x + e, index) - f0) / h
    return g


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def fd_hessian_from_gradients(grad, x, h, variant="forward", index=None, g0=None):
    """Column differences of a gradient evaluator, symmetrized.

    ``forward``/``backward`` cost n + 1 gradient calls (n when the base
    gradient ``g0`` is supplied), ``central`` costs 2n.
    """
    _require_step(h)
    x = np.asarray(x, dtype=float)
    n = x.size
    A = np.empty((n, n))
    if variant in ("forward", "backward"):
        sign = 1.0 if variant == "forward" else -1.0
        g0 = _checked(grad, x, index) if g0 is None else np.asarray(g0, dtype=float)
        for i in range(n):
            e = np.zeros(n)
            e[i] = sign * h
            A[:, i] = sign * (_checked(grad, x + e, index) - g0) / h
    elif variant == "central":
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            A[:, i] = (_checked(grad, x + e, index) - _checked(grad, x - e, index)) / (2 * h)
    else:
        raise ValueError("variant must be 'forward', 'backward' or 'central'")
    return symmetrize(A)


def fd_hessian_from_values(f, x, h, variant="cross", index=None):
    """Second differences of function values, symmetrized.

    ``cross`` uses the four points ``x + h(±e_i ± e_l)`` and costs
    ``2n^2 + 1`` distinct evaluations; ``forward`` uses ``x + h(e_i + e_l)``,
    ``x + h e_i``, ``x + h e_l`` and ``x`` and costs ``1 + n + n(n+1)/2``.
    """
    _require_step(h)
    x = np.asarray(x, dtype=float)
    n = x.size
    cache = {}

    def at(offset):
        # offset: sorted tuple of (coordinate, multiple of h) with nonzero multiples
        if offset not in cache:
            p = x.copy()
            for k, c in offset:
                p[k] += c * h
            cache[offset] = _checked(f, p, index)
        return cache[offset]

    def pt(*terms):
        acc = {}
        for k, c in terms:
            acc[k] = acc.get(k, 0) + c
        return at(tuple(sorted((k, c) for k, c in acc.items() if c != 0)))

    A = np.empty((n, n))
    if variant == "cross":
        for i in range(n):
            for l in range(i, n):
                v = (pt((i, 1), (l, 1)) - pt((i, 1), (l, -1))
                     - pt((l, 1), (i, -1)) + pt((i, -1), (l, -1)))
                A[i, l] = A[l, i] = v / (4 * h * h)
    elif variant == "forward":
        for i in range(n):
            for l in range(i, n):
                v = pt((i, 1), (l, 1)) - pt((i, 1)) - pt((l, 1)) + pt()
                A[i, l] = A[l, i] = v / (h * h)
    else:
        raise ValueError("variant must be 'cross' or 'forward'")
    return symmetrize(A)


def stencil_cost(kind, n):
    """Number of evaluator calls one finite-difference routine makes."""
    costs = {
        "gradient_central": 2 * n,
        "gradient_onesided": n + 1,
        "hessian_gradients_onesided": n + 1,
        "hessian_gradients_central": 2 * n,
        "hessian_values_cross": 2 * n * n + 1,
        "hessian_values_forward": 1 + n + n * (n + 1) // 2,
    }
    try:
        return costs[kind]
    except KeyError:
        raise ValueError(f"unknown stencil kind {kind!r}") from None


# ---------------------------------------------------------------------------
# step-size rules


@dataclass(frozen=True)
class StepRule:
    """Step-size parameters.

    ``floor`` is an absolute lower bound on ``h``; ``None`` means
    ``1e-12 * max(1, ||x||)`` evaluated at the current point.
    """

    beta: float = 0.5
    alpha: float = 2.0
    floor: Optional[float] = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if self.floor is not None and self.floor < 0:
            raise ValueError("floor must be nonnegative")


def step_size(rule, delta_norm, n, i, context, x_norm=0.0):
    """Finite-difference step tied to ``delta = ||x_t - x_{t-1}||`` and inner index ``i``.

    With ``d = n**beta * alpha**(i - 1)`` the contexts give
    ``alg1_grad_central``: ``sqrt(6/d) * delta``;
    ``alg1_grad_onesided``: ``2 delta**2 / d``;
    ``alg1_hess_grad``: ``2 delta / d``;
    ``alg1_hess_values``: ``3 delta / (2 d)``;
    ``alg2_combined``: the smaller of the central-gradient and value-Hessian rules.
    """
    if delta_norm < 0 or i < 0:
        raise ValueError("delta_norm and i must be nonnegative")
    floor = 1e-12 * max(1.0, x_norm) if rule.floor is None else rule.floor
    if delta_norm == 0 and floor == 0:
        raise DegenerateStepError("zero displacement and zero step floor")
    d = n**rule.beta * rule.alpha ** (i - 1)
    if context == "alg1_grad_central":
        h = np.sqrt(6.0 / d) * delta_norm
    elif context == "alg1_grad_onesided":
        h = 2.0 * delta_norm**2 / d
    elif context == "alg1_hess_grad":
        h = 2.0 * delta_norm / d
    elif context == "alg1_hess_values":
        h = 1.5 * delta_norm / d
    elif context == "alg2_combined":
        h = min(np.sqrt(6.0 / d), 1.5 / d) * delta_norm
    else:
        raise ValueError(f"unknown step context {context!r}")
    return float(max(h, floor))


# ---------------------------------------------------------------------------
# derivative bundles


@dataclass(frozen=True)
class DerivativeMode:
    gradient_mode: str = "exact"
    hessian_mode: str = "exact"

    def __post_init__(self):
        if self.gradient_mode not in GRADIENT_MODES:
            raise ConfigurationError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.hessian_mode not in HESSIAN_MODES:
            raise ConfigurationError(f"unknown hessian_mode {self.hessian_mode!r}")

    @property
    def exact(self):
        return self.gradient_mode == "exact" and self.hessian_mode == "exact"

    @property
    def derivative_free(self):
        return self.gradient_mode != "exact" and self.hessian_mode.startswith("from_values")


EXACT = DerivativeMode("exact", "exact")
DERIVATIVE_FREE = DerivativeMode("central_fd", "from_values_cross")


@dataclass
class DerivativeBundle:
    """Per-objective gradients and symmetric Hessians at ``point``.

    ``kappa_G`` and ``kappa_H`` are the structural error factors for unit
    Lipschitz constant: multiply by ``L`` for the actual coefficients.
    """

    point: np.ndarray
    gradients: list
    hessians: list
    kappa_G: float
    kappa_H: float
    h_grad: Optional[float]
    h_hess: Optional[float]
    inner_index: int

    @property
    def h_used(self):
        steps = [h for h in (self.h_grad, self.h_hess) if h is not None]
        return min(steps) if steps else None


def build_bundle(problem, mode, rule, x, x_prev, i):
    """Derivative approximations at ``x`` for inner index ``i``.

    Steps follow :func:`step_size` with ``delta = ||x - x_prev||``.  The
    derivative-free pairing (central gradients with cross value Hessians)
    shares the combined step; other pairings use their own rules.
    """
    x = np.asarray(x, dtype=float)
    n, m = problem.n, problem.m
    needs_grad = mode.gradient_mode == "exact" or mode.hessian_mode.startswith("from_gradients")
    if needs_grad and not problem.has_gradients:
        raise ConfigurationError(f"problem {problem.name} has no analytic gradients")
    if mode.hessian_mode == "exact" and not problem.has_hessians:
        raise ConfigurationError(f"problem {problem.name} has no analytic Hessians")

    delta = float(np.linalg.norm(x - np.asarray(x_prev, dtype=float)))
    x_norm = float(np.linalg.norm(x))
    grad_factor = n ** ((1 - 2 * rule.beta) / 2)
    combined = mode.gradient_mode == "central_fd" and mode.hessian_mode == "from_values_cross"

    h_grad = h_hess = None
    kappa_G = kappa_H = 0.0
    if mode.gradient_mode == "central_fd":
        ctx = "alg2_combined" if combined else "alg1_grad_central"
        h_grad = step_size(rule, delta, n, i, ctx, x_norm)
        kappa_G = grad_factor
    elif mode.gradient_mode in ("forward_fd", "backward_fd"):
        h_grad = step_size(rule, delta, n, i, "alg1_grad_onesided", x_norm)
        kappa_G = grad_factor
    if mode.hessian_mode.startswith("from_gradients"):
        h_hess = step_size(rule, delta, n, i, "alg1_hess_grad", x_norm)
        kappa_H = grad_factor
    elif mode.hessian_mode.startswith("from_values"):
        ctx = "alg2_combined" if combined else "alg1_hess_values"
        h_hess = step_size(rule, delta, n, i, ctx, x_norm)
        kappa_H = n ** (1 - rule.beta)

    grads, hessians = [], []
    for j in range(m):
        f = lambda p, j=j: problem.value(j, p)
        g = lambda p, j=j: problem.grad(j, p)
        gm = mode.gradient_mode
        if gm == "exact":
            grads.append(problem.grad(j, x))
        elif gm == "central_fd":
            grads.append(fd_gradient_central(f, x, h_grad, index=j))
        else:
            side = "forward" if gm == "forward_fd" else "backward"
            grads.append(fd_gradient_onesided(f, x, h_grad, side=side, index=j))
        hm = mode.hessian_mode
        if hm == "exact":
            hessians.append(symmetrize(problem.hess(j, x)))
        elif hm.startswith("from_gradients"):
            base = grads[j] if gm == "exact" else None
            hessians.append(fd_hessian_from_gradients(g, x, h_hess, hm.rsplit("_", 1)[1],
                                                      index=j, g0=base))
        else:
            hessians.append(fd_hessian_from_values(f, x, h_hess, hm.rsplit("_", 1)[1], index=j))
    return DerivativeBundle(x.copy(), grads, hessians, kappa_G, kappa_H, h_grad, h_hess, i)
