"""Compare exact, inexact and derivative-free configurations on a small problem set.

Prints the fraction of instances each configuration solves within a factor
tau of the best, for outer iterations and function evaluations.
Run with ``python demos/profiles.py``.
"""

from mcrm import harness as Hn
from mcrm.driver import preset

problems = ["AP2", "CUB2", "FDS", "JOS1", "SP1"]
configs = {k: preset(k) for k in ("exact", "inexact", "df")}
rows = Hn.run_campaign(Hn.CampaignSpec(problems, 5, 0, configs))

for metric in ("outer_iters", "f_evals"):
    table = Hn.profile_table(rows, metric, taus=[1.0, 2.0, 4.0, 10.0])
    print(metric)
    print("  tau    " + "  ".join(f"{k:>8}" for k in configs))
    for row in table:
        print(f"  {row['tau']:<5g}  " + "  ".join(f"{row[k]:8.2f}" for k in configs))
