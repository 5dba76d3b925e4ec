"""Multi-start experiments: Pareto fronts, performance profiles and the logistic study."""

import csv
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import problems as P
from .derivatives import fd_gradient_central, step_size
from .driver import McrmConfig, run

TAU_GRID = np.round(np.arange(1.0, 10.0 + 1e-9, 0.05), 10)


# ---------------------------------------------------------------------------
# starts and single runs


def start_rng(seed, name, k):
    """Generator for start ``k`` of problem ``name``; independent of run order."""
    return np.random.default_rng([int(seed), zlib.crc32(name.upper().encode()), int(k)])


def draw_start(problem, rng, scalar_eta=False):
    """``x0`` from the box with uniform ``eta`` (one per component unless ``scalar_eta``)."""
    eta = rng.uniform(size=None if scalar_eta else problem.n)
    eta = np.clip(eta, 1e-12, 1 - 1e-12)
    return P.make_start(problem, eta)


def prepare(problem, config, x0, gamma=None):
    """Scaled problem for a run from ``x0``.

    Scale factors use analytic gradients in the exact-gradient modes and
    central differences otherwise (with the step the first iteration would use).
    """
    if gamma is not None:
        return P.scale_factors(problem, x0, gamma=gamma)
    if config.mode.gradient_mode == "exact" and problem.has_gradients:
        return P.scale_factors(problem, x0)
    x1 = P.second_start(x0)
    h = step_size(config.step_rule, float(np.linalg.norm(x1 - x0)), problem.n, 1,
                  "alg1_grad_central", float(np.linalg.norm(x0)))
    return P.scale_factors(problem, x0, grad_source=lambda j, x: fd_gradient_central(
        lambda p: problem.value(j, p), x, h, index=j))


def solve_from(problem, config, x0, gamma=None):
    """Scale, run from ``(x0, second_start(x0))``; returns ``(result, scaled_problem, seconds)``."""
    t0 = time.perf_counter()
    sp = prepare(problem, config, x0, gamma)
    result = run(sp, config, x0, P.second_start(x0))
    return result, sp, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# fronts


@dataclass
class FrontPoint:
    x: np.ndarray
    f: np.ndarray
    g_norm: float
    status: str
    start_seed: int
    extra: dict = field(default_factory=dict)


def dominates(a, b):
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_filter(points):
    """Non-dominated subset; identical f-vectors keep the lowest ``start_seed``.

    The result is sorted by (f, start_seed) and does not depend on input order.
    """
    pts = sorted(points, key=lambda p: (tuple(np.asarray(p.f, dtype=float)), p.start_seed))
    unique = []
    for p in pts:
        if unique and np.array_equal(unique[-1].f, p.f):
            continue
        unique.append(p)
    return [p for p in unique
            if not any(dominates(np.asarray(q.f), np.asarray(p.f)) for q in unique if q is not p)]


def knee_index(F):
    """Index of the point farthest from the chord joining the two extremes.

    Objectives are normalized to [0, 1] over the given points (two objectives).
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] != 2:
        raise ValueError("knee detection needs two objectives")
    if F.shape[0] <= 2:
        return 0
    lo, hi = F.min(axis=0), F.max(axis=0)
    Z = (F - lo) / np.where(hi > lo, hi - lo, 1.0)
    a, b = Z[np.argmin(F[:, 0])], Z[np.argmin(F[:, 1])]
    d = b - a
    norm = np.linalg.norm(d)
    if norm == 0:
        return 0
    dist = np.abs(d[0] * (Z[:, 1] - a[1]) - d[1] * (Z[:, 0] - a[0])) / norm
    return int(np.argmax(dist))


def hausdorff(A, B):
    """Symmetric Hausdorff distance between two finite point sets."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


# ---------------------------------------------------------------------------
# performance profiles


def performance_profile(costs, taus=TAU_GRID):
    """Dolan-More profiles.

    ``costs`` maps a configuration label to per-instance costs (``inf`` for
    unsolved).  Returns ``{label: rho}`` with ``rho[k]`` the fraction of
    instances whose cost ratio to the best configuration is ``<= taus[k]``.
    A zero cost has ratio 1 when it is the best.
    """
    labels = list(costs)
    C = np.array([np.asarray(costs[k], dtype=float) for k in labels])
    if C.ndim != 2 or C.shape[1] == 0:
        raise ValueError("need at least one instance")
    best = C.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(best > 0, C / best, np.where(C == 0, 1.0, np.inf))
    R[:, ~np.isfinite(best)] = np.inf
    taus = np.asarray(taus, dtype=float)
    ok = np.isfinite(R)
    return {lab: np.array([(ok[k] & (R[k] <= tau)).mean() for tau in taus])
            for k, lab in enumerate(labels)}


# ---------------------------------------------------------------------------
# CSV


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(row[h]) for h in header])


def read_csv(path):
    """Rows as dicts; numeric-looking cells become int or float."""
    def conv(s):
        if s == "":
            return None
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# campaigns


@dataclass
class CampaignSpec:
    problems: List[str]
    starts_per_problem: int
    seed: int
    configs: dict  # label -> McrmConfig
    output_dir: Optional[str] = None
    scalar_eta: bool = False

    def __post_init__(self):
        if not self.problems:
            raise ValueError("empty problem list")
        if self.starts_per_problem < 1:
            raise ValueError("starts_per_problem must be at least 1")
        for name in self.problems:
            P.get_problem(name)


def _run_task(task):
    name, label, config_dict, k, seed, scalar_eta = task
    problem = P.get_problem(name)
    config = McrmConfig.from_dict(config_dict)
    x0 = draw_start(problem, start_rng(seed, name, k), scalar_eta)
    result, sp, secs = solve_from(problem, config, x0)
    if not result.trace:
        return {"problem": problem.name, "config": label, "seed": k, "status": result.status,
                "outer_iters": 0, "f_evals": 0, "g_evals": 0, "wall_time": secs,
                "g_norm": np.nan, "x": x0, "f": np.full(problem.m, np.nan)}
    x = result.final.x
    return {
        "problem": problem.name, "config": label, "seed": k, "status": result.status,
        "outer_iters": result.outer_iterations, "f_evals": result.final.evals_f,
        "g_evals": result.final.evals_g, "wall_time": secs, "g_norm": result.final.g_norm,
        "x": x, "f": result.final.f_values / sp.gamma,
    }


def _map(func, tasks, jobs):
    if jobs <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(func, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def run_campaign(spec, jobs=1):
    """Per-instance rows sorted by (problem, config, seed)."""
    tasks = [(name, label, cfg.to_dict(), k, spec.seed, spec.scalar_eta)
             for name in spec.problems for label, cfg in spec.configs.items()
             for k in range(spec.starts_per_problem)]
    rows = _map(_run_task, tasks, jobs)
    rows.sort(key=lambda r: (r["problem"], r["config"], r["seed"]))
    return rows


def profile_table(rows, metric="outer_iters", taus=TAU_GRID):
    """Profile rows ``{"tau": .., label: rho, ...}`` from campaign rows."""
    labels = sorted({r["config"] for r in rows})
    inst = sorted({(r["problem"], r["seed"]) for r in rows})
    index = {(r["problem"], r["seed"], r["config"]): r for r in rows}
    costs = {}
    for lab in labels:
        c = []
        for p, s in inst:
            r = index.get((p, s, lab))
            ok = r is not None and r["status"] == "converged"
            c.append(float(r[metric]) if ok else np.inf)
        costs[lab] = c
    prof = performance_profile(costs, taus)
    return [dict({"metric": metric, "tau": float(t)}, **{lab: float(prof[lab][k]) for lab in labels})
            for k, t in enumerate(taus)]


def front_from_rows(rows):
    pts = [FrontPoint(np.asarray(r["x"]), np.asarray(r["f"]), r["g_norm"], r["status"], r["seed"])
           for r in rows if r["status"] == "converged"]
    return dominance_filter(pts)


def front_rows(front):
    """Flat dict rows, objective values first."""
    out = []
    for p in front:
        row = {f"f_{j + 1}": float(v) for j, v in enumerate(p.f)}
        row.update({f"x_{i + 1}": float(v) for i, v in enumerate(p.x)})
        row.update({"g_norm": p.g_norm, "status": p.status, "start_seed": p.start_seed})
        row.update(p.extra)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# logistic study

LOGISTIC_GAMMA = (0.1, 1.0)


def _logreg_task(task):
    features, labels, train_count, config_dict, k, seed, gamma = task
    data = P.LogisticDataset(features, labels, train_count)
    problem = P.logistic_objectives(data)
    config = McrmConfig.from_dict(config_dict)
    x0 = draw_start(problem, start_rng(seed, "LOGREG", k))
    result, sp, _ = solve_from(problem, config, x0, gamma=gamma)
    if not result.trace:
        return {"seed": k, "status": result.status, "x": x0, "f": np.full(2, np.nan),
                "g_norm": np.nan, "outer_iters": 0}
    x = result.final.x
    return {"seed": k, "status": result.status, "x": x, "f": result.final.f_values / sp.gamma,
            "g_norm": result.final.g_norm, "outer_iters": result.outer_iterations}


def logistic_study(dataset, config, starts, seed=0, jobs=1, gamma=LOGISTIC_GAMMA):
    """Multi-start runs on the two-objective logistic problem.

    Returns ``(front, runs)``.  Each front point carries train/test accuracy
    and a ``role`` of ``min_f1``, ``min_f2``, ``knee`` or empty.
    """
    tasks = [(dataset.features, dataset.labels, dataset.train_count, config.to_dict(), k, seed,
              gamma) for k in range(starts)]
    runs = sorted(_map(_logreg_task, tasks, jobs), key=lambda r: r["seed"])
    front = front_from_rows(runs)
    if not front:
        return front, runs
    F = np.array([p.f for p in front])
    roles = {}
    roles[int(np.argmin(F[:, 0]))] = "min_f1"
    roles[int(np.argmin(F[:, 1]))] = "min_f2"
    k = knee_index(F)
    roles.setdefault(k, "knee")
    for idx, p in enumerate(front):
        p.extra = {
            "train_accuracy": P.accuracy(dataset, p.x, "train"),
            "test_accuracy": P.accuracy(dataset, p.x, "test") if dataset.test_count else math.nan,
            "role": roles.get(idx, ""),
            "knee": idx == k,
        }
    return front, runs
