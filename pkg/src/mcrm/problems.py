"""Multiobjective test problems, objective scaling and start-point rules.

A problem is a list of ``m`` scalar objectives on R^n, optionally with analytic
gradients and Hessians, plus a box ``[lower, upper]`` that is only used to
generate starting points.  Problems are looked up by name (case-insensitive)
through :func:`get_problem`; new ones are added with :func:`register`.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EvaluationError

Scalar = Callable[[np.ndarray], float]
Vector = Callable[[np.ndarray], np.ndarray]


def _as_point(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"expected a point of dimension {n}, got shape {x.shape}")
    return x


@dataclass
class ProblemInstance:
    """``m`` objectives ``F_j: R^n -> R`` with optional derivatives.

    ``lipschitz`` is an optional, analytically known global Lipschitz
    constant of the objective Hessians (``max_j L_j``); it is metadata for
    trace verification and never used by the solver.
    """

    name: str
    n: int
    m: int
    objectives: Sequence[Scalar]
    lower: np.ndarray
    upper: np.ndarray
    gradients: Optional[Sequence[Vector]] = None
    hessians: Optional[Sequence[Callable[[np.ndarray], np.ndarray]]] = None
    convex: bool = False
    lipschitz: Optional[float] = None
    f_lower: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.n,)).copy()
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if len(self.objectives) != self.m:
            raise ValueError("need exactly m objectives")
        if not np.all(self.lower < self.upper):
            raise ValueError("lower < upper must hold componentwise")
        for name in ("gradients", "hessians"):
            funcs = getattr(self, name)
            if funcs is not None and len(funcs) != self.m:
                raise ValueError(f"need exactly m {name}")

    @property
    def has_gradients(self):
        return self.gradients is not None

    @property
    def has_hessians(self):
        return self.hessians is not None

    def value(self, j, x):
        v = float(self.objectives[j](x))
        if not np.isfinite(v):
            raise EvaluationError(f"objective {j} is not finite at x", index=j, point=x)
        return v

    def grad(self, j, x):
        if self.gradients is None:
            raise ConfigurationError(f"problem {self.name} has no analytic gradients")
        g = np.asarray(self.gradients[j](x), dtype=float).reshape(self.n)
        if not np.all(np.isfinite(g)):
            raise EvaluationError(f"gradient {j} is not finite at x", index=j, point=x)
        return g

    def hess(self, j, x):
        if self.hessians is None:
            raise ConfigurationError(f"problem {self.name} has no analytic Hessians")
        H = np.asarray(self.hessians[j](x), dtype=float).reshape(self.n, self.n)
        if not np.all(np.isfinite(H)):
            raise EvaluationError(f"Hessian {j} is not finite at x", index=j, point=x)
        return H

    def evaluate(self, x):
        return evaluate(self, x)


@dataclass
class ScaledProblem:
    """``base`` with every objective multiplied by ``gamma_j`` in (0, 1]."""

    base: ProblemInstance
    gamma: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(self.base.m)
        if np.any(self.gamma <= 0) or np.any(self.gamma > 1):
            raise ValueError("scale factors must lie in (0, 1]")

    name = property(lambda self: self.base.name)
    n = property(lambda self: self.base.n)
    m = property(lambda self: self.base.m)
    lower = property(lambda self: self.base.lower)
    upper = property(lambda self: self.base.upper)
    convex = property(lambda self: self.base.convex)
    has_gradients = property(lambda self: self.base.has_gradients)
    has_hessians = property(lambda self: self.base.has_hessians)

    @property
    def lipschitz(self):
        L = self.base.lipschitz
        return None if L is None else float(L * self.gamma.max())

    @property
    def f_lower(self):
        lo = self.base.f_lower
        return None if lo is None else self.gamma * np.asarray(lo, dtype=float)

    def value(self, j, x):
        return self.gamma[j] * self.base.value(j, x)

    def grad(self, j, x):
        return self.gamma[j] * self.base.grad(j, x)

    def hess(self, j, x):
        return self.gamma[j] * self.base.hess(j, x)

    def evaluate(self, x):
        return evaluate(self, x)


def evaluate(problem, x):
    """Return ``(F_1(x), ..., F_m(x))``."""
    x = _as_point(x, problem.n)
    return np.array([problem.value(j, x) for j in range(problem.m)])


def make_start(problem, eta):
    """Convex combination ``(1 - eta) * lower + eta * upper``.

    ``eta`` is a scalar in (0, 1); an array of per-component values is also
    accepted.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or np.any(eta >= 1):
        raise ValueError("eta must lie in the open interval (0, 1)")
    return (1.0 - eta) * problem.lower + eta * problem.upper


def second_start(x0):
    """Second starting point: ``1e-4 * sqrt(n)`` added to every component."""
    x0 = np.asarray(x0, dtype=float)
    return x0 + 1e-4 * np.sqrt(x0.size)


def scale_factors(problem, x0, grad_source=None, gamma=None):
    """Wrap ``problem`` with ``gamma_j = 1 / max(1, ||grad F_j(x0)||_inf)``.

    ``grad_source(j, x)`` supplies the gradients (analytic by default, or a
    finite-difference callable for derivative-free runs).  Passing ``gamma``
    explicitly bypasses the formula.
    """
    if gamma is None:
        if grad_source is None:
            grad_source = problem.grad
        x0 = _as_point(x0, problem.n)
        norms = np.array([np.max(np.abs(grad_source(j, x0))) for j in range(problem.m)])
        if not np.all(np.isfinite(norms)):
            bad = int(np.flatnonzero(~np.isfinite(norms))[0])
            raise EvaluationError("gradient not finite at x0", index=bad, point=x0)
        gamma = 1.0 / np.maximum(1.0, norms)
    return ScaledProblem(problem, gamma)


# ---------------------------------------------------------------------------
# registry

_REGISTRY = {}


def register(factory, name=None):
    """Register a zero-argument problem factory under ``name``."""
    key = (name or factory.__name__).upper()
    _REGISTRY[key] = factory
    return factory


def problem_names():
    return sorted(_REGISTRY)


def get_problem(name):
    try:
        factory = _REGISTRY[name.upper()]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; registered: {', '.join(problem_names())}") from None
    return factory()


def _diag(*entries):
    return np.diag(np.array(entries, dtype=float))


@register
def AP1():
    def f1(x):
        return 0.25 * ((x[0] - 1) ** 4 + 2 * (x[1] - 2) ** 4)

    def g1(x):
        return np.array([(x[0] - 1) ** 3, 2 * (x[1] - 2) ** 3])

    def h1(x):
        return _diag(3 * (x[0] - 1) ** 2, 6 * (x[1] - 2) ** 2)

    def f2(x):
        return np.exp(0.5 * (x[0] + x[1])) + x[0] ** 2 + x[1] ** 2

    def g2(x):
        return 0.5 * np.exp(0.5 * (x[0] + x[1])) + 2 * x

    def h2(x):
        return 0.25 * np.exp(0.5 * (x[0] + x[1])) * np.ones((2, 2)) + 2 * np.eye(2)

    def f3(x):
        return (np.exp(-x[0]) + 2 * np.exp(-x[1])) / 6

    def g3(x):
        return -np.array([np.exp(-x[0]), 2 * np.exp(-x[1])]) / 6

    def h3(x):
        return _diag(np.exp(-x[0]), 2 * np.exp(-x[1])) / 6

    return ProblemInstance("AP1", 2, 3, [f1, f2, f3], [-10, -10], [10, 10],
                           [g1, g2, g3], [h1, h2, h3], convex=True)


@register
def AP2():
    return ProblemInstance(
        "AP2", 1, 2,
        [lambda x: x[0] ** 2 - 4, lambda x: (x[0] - 1) ** 2],
        [-100], [100],
        [lambda x: 2 * x, lambda x: 2 * (x - 1)],
        [lambda x: np.array([[2.0]]), lambda x: np.array([[2.0]])],
        convex=True, lipschitz=0.0, f_lower=np.array([-4.0, 0.0]),
    )


@register
def BK1():
    c = np.array([5.0, 5.0])
    return ProblemInstance(
        "BK1", 2, 2,
        [lambda x: x @ x, lambda x: (x - c) @ (x - c)],
        [-5, -5], [10, 10],
        [lambda x: 2 * x, lambda x: 2 * (x - c)],
        [lambda x: 2 * np.eye(2), lambda x: 2 * np.eye(2)],
        convex=True, lipschitz=0.0, f_lower=np.zeros(2),
    )


@register
def DGO1():
    return ProblemInstance(
        "DGO1", 1, 2,
        [lambda x: np.sin(x[0]), lambda x: np.sin(x[0] + 0.7)],
        [-10], [13],
        [lambda x: np.cos(x), lambda x: np.cos(x + 0.7)],
        [lambda x: np.array([[-np.sin(x[0])]]), lambda x: np.array([[-np.sin(x[0] + 0.7)]])],
        convex=False, lipschitz=1.0, f_lower=-np.ones(2),
    )


@register
def FDS():
    n = 5
    idx = np.arange(1, n + 1, dtype=float)
    c3 = idx * (n - idx + 1) / (n * (n + 1))

    def f1(x):
        return np.sum(idx * (x - idx) ** 4) / n**2

    def g1(x):
        return 4 * idx * (x - idx) ** 3 / n**2

    def h1(x):
        return np.diag(12 * idx * (x - idx) ** 2 / n**2)

    def f2(x):
        return np.exp(np.sum(x) / n) + x @ x

    def g2(x):
        return np.exp(np.sum(x) / n) / n + 2 * x

    def h2(x):
        return np.exp(np.sum(x) / n) / n**2 * np.ones((n, n)) + 2 * np.eye(n)

    def f3(x):
        return np.sum(c3 * np.exp(-x))

    def g3(x):
        return -c3 * np.exp(-x)

    def h3(x):
        return np.diag(c3 * np.exp(-x))

    return ProblemInstance("FDS", n, 3, [f1, f2, f3], -2 * np.ones(n), 2 * np.ones(n),
                           [g1, g2, g3], [h1, h2, h3], convex=True)


@register
def Hil1():
    k = 2 * np.pi / 360
    w = 2 * np.pi

    def parts(x):
        a = k * (45 + 40 * np.sin(w * x[0]) + 25 * np.sin(w * x[1]))
        da = k * w * np.array([40 * np.cos(w * x[0]), 25 * np.cos(w * x[1])])
        d2a = -k * w**2 * np.diag([40 * np.sin(w * x[0]), 25 * np.sin(w * x[1])])
        b = 1 + 0.5 * np.cos(w * x[0])
        db = np.array([-0.5 * w * np.sin(w * x[0]), 0.0])
        d2b = np.diag([-0.5 * w**2 * np.cos(w * x[0]), 0.0])
        return a, da, d2a, b, db, d2b

    def f1(x):
        a, _, _, b, _, _ = parts(x)
        return np.cos(a) * b

    def g1(x):
        a, da, _, b, db, _ = parts(x)
        return -np.sin(a) * b * da + np.cos(a) * db

    def h1(x):
        a, da, d2a, b, db, d2b = parts(x)
        cross = np.outer(da, db) + np.outer(db, da)
        return (-np.cos(a) * b * np.outer(da, da) - np.sin(a) * cross
                - np.sin(a) * b * d2a + np.cos(a) * d2b)

    def f2(x):
        a, _, _, b, _, _ = parts(x)
        return np.sin(a) * b

    def g2(x):
        a, da, _, b, db, _ = parts(x)
        return np.cos(a) * b * da + np.sin(a) * db

    def h2(x):
        a, da, d2a, b, db, d2b = parts(x)
        cross = np.outer(da, db) + np.outer(db, da)
        return (-np.sin(a) * b * np.outer(da, da) + np.cos(a) * cross
                + np.cos(a) * b * d2a + np.sin(a) * d2b)

    return ProblemInstance("Hil1", 2, 2, [f1, f2], [0, 0], [1, 1], [g1, g2], [h1, h2])


@register
def JOS1():
    n = 100
    return ProblemInstance(
        "JOS1", n, 2,
        [lambda x: x @ x / n, lambda x: (x - 2) @ (x - 2) / n],
        -100 * np.ones(n), 100 * np.ones(n),
        [lambda x: 2 * x / n, lambda x: 2 * (x - 2) / n],
        [lambda x: 2 * np.eye(n) / n, lambda x: 2 * np.eye(n) / n],
        convex=True, lipschitz=0.0, f_lower=np.zeros(2),
    )


@register
def Lov1():
    c = np.array([3.0, 2.5])
    d1 = np.array([1.05, 0.98])
    d2 = np.array([0.99, 1.03])
    return ProblemInstance(
        "Lov1", 2, 2,
        [lambda x: d1 @ x**2, lambda x: d2 @ (x - c) ** 2],
        [-10, -10], [10, 10],
        [lambda x: 2 * d1 * x, lambda x: 2 * d2 * (x - c)],
        [lambda x: np.diag(2 * d1), lambda x: np.diag(2 * d2)],
        convex=True, lipschitz=0.0, f_lower=np.zeros(2),
    )


@register
def MOP2():
    n = 2
    c = np.ones(n) / np.sqrt(n)

    def make(shift):
        def f(x):
            d = x - shift
            return 1 - np.exp(-d @ d)

        def g(x):
            d = x - shift
            return 2 * d * np.exp(-d @ d)

        def h(x):
            d = x - shift
            return np.exp(-d @ d) * (2 * np.eye(n) - 4 * np.outer(d, d))

        return f, g, h

    (f1, g1, h1), (f2, g2, h2) = make(c), make(-c)
    return ProblemInstance("MOP2", n, 2, [f1, f2], -np.ones(n), np.ones(n),
                           [g1, g2], [h1, h2], f_lower=np.zeros(2))


@register
def MOP3():
    A1 = 0.5 * np.sin(1) - 2 * np.cos(1) + np.sin(2) - 1.5 * np.cos(2)
    A2 = 1.5 * np.sin(1) - np.cos(1) + 2 * np.sin(2) - 0.5 * np.cos(2)

    def terms(x):
        s1, c1, s2, c2 = np.sin(x[0]), np.cos(x[0]), np.sin(x[1]), np.cos(x[1])
        B1 = 0.5 * s1 - 2 * c1 + s2 - 1.5 * c2
        B2 = 1.5 * s1 - c1 + 2 * s2 - 0.5 * c2
        dB1 = np.array([0.5 * c1 + 2 * s1, c2 + 1.5 * s2])
        dB2 = np.array([1.5 * c1 + s1, 2 * c2 + 0.5 * s2])
        d2B1 = np.diag([-0.5 * s1 + 2 * c1, -s2 + 1.5 * c2])
        d2B2 = np.diag([-1.5 * s1 + c1, -2 * s2 + 0.5 * c2])
        return A1 - B1, A2 - B2, dB1, dB2, d2B1, d2B2

    def f1(x):
        r1, r2, *_ = terms(x)
        return 1 + r1**2 + r2**2

    def g1(x):
        r1, r2, dB1, dB2, _, _ = terms(x)
        return -2 * r1 * dB1 - 2 * r2 * dB2

    def h1(x):
        r1, r2, dB1, dB2, d2B1, d2B2 = terms(x)
        return (2 * np.outer(dB1, dB1) - 2 * r1 * d2B1
                + 2 * np.outer(dB2, dB2) - 2 * r2 * d2B2)

    c = np.array([-3.0, -1.0])
    return ProblemInstance(
        "MOP3", 2, 2,
        [f1, lambda x: (x - c) @ (x - c)],
        [-np.pi, -np.pi], [np.pi, np.pi],
        [g1, lambda x: 2 * (x - c)],
        [h1, lambda x: 2 * np.eye(2)],
        f_lower=np.array([1.0, 0.0]),
    )


@register
def PNR():
    def f1(x):
        return (x[0] ** 4 + x[1] ** 4 - x[0] ** 2 + x[1] ** 2
                - 10 * x[0] * x[1] + 0.25 * x[0] + 20)

    def g1(x):
        return np.array([4 * x[0] ** 3 - 2 * x[0] - 10 * x[1] + 0.25,
                         4 * x[1] ** 3 + 2 * x[1] - 10 * x[0]])

    def h1(x):
        return np.array([[12 * x[0] ** 2 - 2, -10.0], [-10.0, 12 * x[1] ** 2 + 2]])

    c = np.array([1.0, 0.0])
    return ProblemInstance(
        "PNR", 2, 2,
        [f1, lambda x: (x - c) @ (x - c)],
        [-2, -2], [2, 2],
        [g1, lambda x: 2 * (x - c)],
        [h1, lambda x: 2 * np.eye(2)],
        convex=True,
    )


@register
def SP1():
    H1 = np.array([[4.0, -2.0], [-2.0, 2.0]])
    H2 = np.array([[2.0, -2.0], [-2.0, 4.0]])
    return ProblemInstance(
        "SP1", 2, 2,
        [lambda x: (x[0] - 1) ** 2 + (x[0] - x[1]) ** 2,
         lambda x: (x[1] - 3) ** 2 + (x[0] - x[1]) ** 2],
        [-100, -100], [100, 100],
        [lambda x: np.array([2 * (x[0] - 1) + 2 * (x[0] - x[1]), -2 * (x[0] - x[1])]),
         lambda x: np.array([2 * (x[0] - x[1]), 2 * (x[1] - 3) - 2 * (x[0] - x[1])])],
        [lambda x: H1, lambda x: H2],
        convex=True, lipschitz=0.0, f_lower=np.zeros(2),
    )


@register
def Toi4():
    H2 = np.array([[1.0, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]])
    return ProblemInstance(
        "Toi4", 4, 2,
        [lambda x: x[0] ** 2 + x[1] ** 2 + 1,
         lambda x: 0.5 * ((x[0] - x[1]) ** 2 + (x[2] - x[3]) ** 2) + 1],
        -2 * np.ones(4), 5 * np.ones(4),
        [lambda x: np.array([2 * x[0], 2 * x[1], 0, 0]), lambda x: H2 @ x],
        [lambda x: _diag(2, 2, 0, 0), lambda x: H2],
        convex=True, lipschitz=0.0, f_lower=np.ones(2),
    )


@register
def SLCDT1():
    lam = 0.85
    e = np.array([1.0, 1.0])
    d = np.array([1.0, -1.0])

    def parts(x):
        u, v = x[0] + x[1], x[0] - x[1]
        p, q, E = np.sqrt(1 + u**2), np.sqrt(1 + v**2), np.exp(-v**2)
        grad = 0.5 * (u / p * e + v / q * d) + lam * (-2 * v * E) * d
        hess = (0.5 * (np.outer(e, e) / p**3 + np.outer(d, d) / q**3)
                + lam * (4 * v**2 - 2) * E * np.outer(d, d))
        return u, v, p, q, E, grad, hess

    def f1(x):
        _, _, p, q, E, _, _ = parts(x)
        return 0.5 * (p + q + x[0] - x[1]) + lam * E

    def f2(x):
        _, _, p, q, E, _, _ = parts(x)
        return 0.5 * (p + q - x[0] + x[1]) + lam * E

    return ProblemInstance(
        "SLCDT1", 2, 2, [f1, f2], [-1.5, -1.5], [1.5, 1.5],
        [lambda x: parts(x)[5] + 0.5 * d, lambda x: parts(x)[5] - 0.5 * d],
        [lambda x: parts(x)[6], lambda x: parts(x)[6]],
    )


@register
def CUB2():
    """Strongly convex bi-objective with cubic terms; Hessians are 1-Lipschitz.

    Not part of the classical corpus: it gives a nonquadratic problem whose
    Lipschitz constant and lower bounds are known exactly.
    """
    anchors = [np.array([0.0, 0.0]), np.array([2.0, 1.0])]

    def make(a):
        def f(x):
            d = x - a
            return 0.5 * d @ d + np.sum(np.abs(d) ** 3) / 6

        def g(x):
            d = x - a
            return d + 0.5 * d * np.abs(d)

        def h(x):
            return np.eye(2) + np.diag(np.abs(x - a))

        return f, g, h

    (f1, g1, h1), (f2, g2, h2) = make(anchors[0]), make(anchors[1])
    return ProblemInstance("CUB2", 2, 2, [f1, f2], [-3, -3], [4, 4], [g1, g2], [h1, h2],
                           convex=True, lipschitz=1.0, f_lower=np.zeros(2))


# ---------------------------------------------------------------------------
# logistic regression as a two-objective problem


@dataclass
class LogisticDataset:
    """Records ``a`` in [0, 1]^n with labels ``b`` in {0, 1}.

    The first ``train_count`` rows form the training split, the remaining
    ``test_count`` rows the test split.
    """

    features: np.ndarray
    labels: np.ndarray
    train_count: int
    test_count: int = field(init=False)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        total = self.features.shape[0]
        if self.labels.shape[0] != total:
            raise ValueError("features and labels differ in length")
        if not 0 <= self.train_count <= total:
            raise ValueError("train_count out of range")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if np.any(self.features < 0) or np.any(self.features > 1):
            raise ValueError("features must be scaled into [0, 1]")
        self.test_count = total - self.train_count

    @property
    def n(self):
        return self.features.shape[1]

    def split(self, which):
        if which == "train":
            a, b = self.features[: self.train_count], self.labels[: self.train_count]
        elif which == "test":
            a, b = self.features[self.train_count:], self.labels[self.train_count:]
        else:
            raise ValueError("split must be 'train' or 'test'")
        if a.shape[0] == 0:
            raise ValueError(f"the {which} split is empty")
        return a, b


def minmax_scale(features):
    """Scale each column into [0, 1]; constant columns map to 0."""
    features = np.asarray(features, dtype=float)
    lo, hi = features.min(axis=0), features.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.clip((features - lo) / span, 0.0, 1.0)


def load_logistic_csv(path, label_col=-1, header=False, feature_cols=None,
                      train_count=None, positive_label=None):
    """Read a comma-separated file into a :class:`LogisticDataset`.

    Features are min-max scaled over the whole file before splitting; the
    first ``train_count`` rows (default: all but the last 100) are for
    training.  Labels must be 0/1 unless ``positive_label`` names the value
    mapped to 1 (everything else maps to 0).
    """
    import csv

    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for row in reader:
            if row and any(cell.strip() for cell in row):
                rows.append((reader.line_num, [cell.strip() for cell in row]))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0][1])
    label_col = label_col % width
    if feature_cols is None:
        feature_cols = [c for c in range(width) if c != label_col]
    feats, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise ValueError(f"{path}:{line}: expected {width} columns, found {len(row)}")
        raw = row[label_col]
        if positive_label is not None:
            labels.append(1.0 if raw == str(positive_label) else 0.0)
        else:
            try:
                lab = float(raw)
            except ValueError:
                raise ValueError(f"{path}:{line}: column {label_col}: bad label {raw!r}") from None
            if lab not in (0.0, 1.0):
                raise ValueError(f"{path}:{line}: column {label_col}: label must be 0 or 1")
            labels.append(lab)
        vals = []
        for c in feature_cols:
            try:
                vals.append(float(row[c]))
            except ValueError:
                raise ValueError(f"{path}:{line}: column {c}: not a number: {row[c]!r}") from None
        feats.append(vals)
    feats = minmax_scale(np.array(feats))
    total = feats.shape[0]
    if train_count is None:
        train_count = max(total - 100, 0)
    return LogisticDataset(feats, np.array(labels), train_count)


def synthetic_logistic(n=10, train_count=468, test_count=100, noise=0.0, margin=0.05, seed=0):
    """Linearly separable records in [0, 1]^n (through the origin).

    Raw features are uniform; after min-max scaling the labels are assigned
    by a random hyperplane with mixed-sign normal and points closer than
    ``margin`` to it are resampled.  ``noise`` flips that fraction of labels.
    """
    rng = np.random.default_rng(seed)
    total = train_count + test_count
    w = rng.normal(size=n)
    w -= w.mean()  # mixed signs so the all-ones direction is not a classifier
    w /= np.linalg.norm(w)
    kept = np.empty((0, n))
    while kept.shape[0] < total:
        a = minmax_scale(rng.uniform(size=(4 * total, n)))
        kept = np.vstack([kept, a[np.abs(a @ w) >= margin]])
    a = kept[:total]
    labels = (a @ w > 0).astype(float)
    if noise > 0:
        flip = rng.uniform(size=total) < noise
        labels[flip] = 1 - labels[flip]
    return LogisticDataset(a, labels, train_count)


def _log_sigmoid_loss(z, b):
    # -[b log s(z) + (1-b) log(1 - s(z))] = log(1 + e^z) - b z
    return np.logaddexp(0.0, z) - b * z


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_objectives(dataset, lower=-10.0, upper=10.0):
    """Two objectives: training negative log-likelihood and ``||x||^2 / 2``."""
    a, b = dataset.split("train")
    n = dataset.n

    def f1(x):
        return float(np.sum(_log_sigmoid_loss(a @ x, b)))

    def g1(x):
        return a.T @ (_sigmoid(a @ x) - b)

    def h1(x):
        s = _sigmoid(a @ x)
        return (a * (s * (1 - s))[:, None]).T @ a

    return ProblemInstance(
        "LOGREG", n, 2,
        [f1, lambda x: 0.5 * x @ x],
        lower * np.ones(n), upper * np.ones(n),
        [g1, lambda x: np.array(x, dtype=float)],
        [h1, lambda x: np.eye(n)],
        convex=True, f_lower=np.zeros(2),
    )


def accuracy(dataset, x, split="test"):
    """Fraction of records whose prediction ``sigma_x(a) >= 1/2`` matches the label."""
    a, b = dataset.split(split)
    pred = (a @ np.asarray(x, dtype=float) >= 0).astype(float)
    return float(np.mean(pred == b))
