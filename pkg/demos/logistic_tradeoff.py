"""Loss versus L1 penalty for logistic regression on a synthetic two-class set.

Prints the front with the three marked points: smallest loss, knee and
smallest penalty.  Run with ``python demos/logistic_tradeoff.py``.
"""

import numpy as np

from mcrm import harness as Hn
from mcrm import problems as P
from mcrm.driver import preset

data = P.synthetic_logistic(seed=0)
front, runs = Hn.logistic_study(data, preset("df"), starts=30, seed=0)
conv = sum(r["status"] == "converged" for r in runs)
print(f"{conv}/{len(runs)} runs converged, {len(front)} front points")
print(f"{'loss':>10} {'penalty':>10} {'train':>6} {'test':>6}  role")
for p in front:
    tag = p.extra["role"]
    if p.extra["knee"] and tag != "knee":
        tag += " (also the knee)"
    if tag:
        print(f"{p.f[0]:10.4f} {p.f[1]:10.4f} {p.extra['train_accuracy']:6.3f} "
              f"{p.extra['test_accuracy']:6.3f}  {tag}")
print(f"zero-penalty point norm: {min(np.linalg.norm(p.x) for p in front):.1e}")
