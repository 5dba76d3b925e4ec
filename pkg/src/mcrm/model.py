"""Cubic models ``M^j(y) = <g_j, s> + <H_j s, s>/2 + sigma/6 ||s||^3`` with ``s = y - x``."""

import numpy as np

SIMPLEX_TOL = 1e-12
TIE_TOL = 1e-12


def validate_weights(w, m=None):
    """Return ``w`` as a float array after checking it lies in the unit simplex."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if m is not None and w.size != m:
        raise ValueError(f"expected {m} weights, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL * max(1, w.size):
        raise ValueError("weights must be nonnegative and sum to one")
    return w


def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    w = np.maximum(v - css[rho] / (rho + 1), 0.0)
    return w / w.sum()


def min_norm_weights(vectors, max_iter=1000):
    """Simplex weights minimizing ``||sum_j w_j v_j||`` (Wolfe's min-norm-point method).

    ``vectors`` has one row per point.  Returns ``(w, norm)``.
    """
    P = np.atleast_2d(np.asarray(vectors, dtype=float))
    m = P.shape[0]
    if m == 1:
        return np.ones(1), float(np.linalg.norm(P[0]))
    scale = max(1.0, float(np.max(np.abs(P))))
    Q = P / scale
    norms = np.einsum("ij,ij->i", Q, Q)
    start = int(np.argmin(norms))
    S = [start]
    w = np.zeros(m)
    w[start] = 1.0
    tol = 1e-14
    for _ in range(max_iter):
        x = w @ Q
        # major cycle: most violated optimality direction
        scores = Q @ x
        j = int(np.argmin(scores))
        if x @ x - scores[j] <= tol * max(1.0, np.max(norms)) or j in S:
            break
        S.append(j)
        while True:
            # affine minimizer over the current corral
            B = Q[S]
            k = len(S)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = B @ B.T
            K[:k, k] = K[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            v = sol[:k]
            if np.all(v > tol):
                w[:] = 0.0
                w[S] = v
                break
            # minor cycle: move toward the affine minimizer until a weight hits zero
            cur = w[S]
            mask = v <= tol
            ratios = cur[mask] / np.maximum(cur[mask] - v[mask], 1e-300)
            theta = min(1.0, float(np.min(ratios)))
            new = (1 - theta) * cur + theta * v
            new[new < tol] = 0.0
            keep = new > 0
            w[:] = 0.0
            w[S] = new
            S = [s for s, kp in zip(S, keep) if kp]
            w /= w.sum()
    w = np.maximum(w, 0.0)
    w /= w.sum()
    return w, float(np.linalg.norm(w @ P))


class CubicModel:
    """Per-objective cubic models sharing the base point and regularization.

    Parameters
    ----------
    base : array, shape (n,)
    sigma : float
        Positive cubic weight.
    gradients, hessians : sequences of length m
        Model gradients ``g_j`` and symmetric Hessians ``H_j``.
    """

    def __init__(self, base, sigma, gradients, hessians):
        self.base = np.asarray(base, dtype=float).copy()
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.G = np.array([np.asarray(g, dtype=float).reshape(-1) for g in gradients])
        self.H = np.array([np.asarray(H, dtype=float) for H in hessians])
        n = self.base.size
        if self.G.shape[1:] != (n,) or self.H.shape[1:] != (n, n) or len(self.G) != len(self.H):
            raise ValueError("gradient/Hessian shapes do not match the base point")
        if not (np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.H))):
            raise ValueError("model data must be finite")

    @classmethod
    def from_bundle(cls, bundle, sigma):
        return cls(bundle.point, sigma, bundle.gradients, bundle.hessians)

    @property
    def m(self):
        return self.G.shape[0]

    @property
    def n(self):
        return self.base.size

    def _check(self, j):
        if not 0 <= j < self.m:
            raise IndexError(f"objective index {j} out of range 0..{self.m - 1}")

    # the methods taking ``s`` work with the displacement from the base point

    def values_at_step(self, s):
        s = np.asarray(s, dtype=float)
        r = np.linalg.norm(s)
        return self.G @ s + 0.5 * np.einsum("i,kij,j->k", s, self.H, s) + self.sigma / 6 * r**3

    def gradients_at_step(self, s):
        s = np.asarray(s, dtype=float)
        r = np.linalg.norm(s)
        return self.G + self.H @ s + 0.5 * self.sigma * r * s

    def eval_component(self, j, y):
        self._check(j)
        s = np.asarray(y, dtype=float) - self.base
        return float(self.G[j] @ s + 0.5 * s @ self.H[j] @ s
                     + self.sigma / 6 * np.linalg.norm(s) ** 3)

    def eval_max(self, y):
        """``(max_j M^j(y), active set)``; ties within ``1e-12 (1 + |max|)`` are active."""
        vals = self.values_at_step(np.asarray(y, dtype=float) - self.base)
        top = float(vals.max())
        active = [int(j) for j in np.flatnonzero(vals >= top - TIE_TOL * (1 + abs(top)))]
        return top, active

    def grad_component(self, j, y):
        self._check(j)
        s = np.asarray(y, dtype=float) - self.base
        return self.G[j] + self.H[j] @ s + 0.5 * self.sigma * np.linalg.norm(s) * s

    def kkt_residual(self, y, w):
        w = validate_weights(w, self.m)
        s = np.asarray(y, dtype=float) - self.base
        return float(np.linalg.norm(w @ self.gradients_at_step(s)))
