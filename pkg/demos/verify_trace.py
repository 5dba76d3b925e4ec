"""Solve one problem, then re-check the stored trace against the method's guarantees.

Run with ``python demos/verify_trace.py [PROBLEM]`` (default CUB2).
"""

import sys

import numpy as np

from mcrm import harness as Hn
from mcrm import problems as P
from mcrm.driver import preset, verify_trace

name = sys.argv[1] if len(sys.argv) > 1 else "CUB2"
prob = P.get_problem(name)
x0 = Hn.draw_start(prob, Hn.start_rng(0, name, 0))
res, sp, secs = Hn.solve_from(prob, preset("exact"), x0)

print(f"{name}: status {res.status} after {len(res.trace) - 1} outer iterations ({secs:.2f}s)")
print(f"  final x = {np.array2string(res.trace[-1].x, precision=6)}")
for rec in res.trace:
    print(f"  t={rec.t:2d} sigma={rec.sigma:.3g} i={rec.i_t} |s|={rec.step_norm:.3e} "
          f"g={rec.g_norm:.3e}")

report = verify_trace(res, L=sp.lipschitz, f_lower=sp.f_lower)
rates = report.pop("rates")
for key, item in report.items():
    print(f"  {key:18s} {item['status'].upper():8s} {item.get('detail', '')}")
print("  g_{t+1} / g_t^2: " + ", ".join(f"{r:.3g}" for r in rates))
