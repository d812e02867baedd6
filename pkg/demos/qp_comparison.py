"""Proposed intervals vs plug-in intervals on the banded QP example.

The plug-in intervals use the full covariance Lambda_N and ignore the
degenerate block, so they are wider than needed on the active coordinates
and miss the piecewise structure.  Takes about a minute at n=300.
"""

import numpy as np

from pwnci.bench import aggregate, coverage_table, default_config, run_experiment
from pwnci.gauss import chi2_quantile


def main():
    cfg = default_config("qp")
    problem = cfg.build_problem()
    summary = aggregate(run_experiment(cfg), problem)
    print(coverage_table(summary, title=f"qp: n={cfg.n}, N={cfg.N}, R={cfg.reps}"))
    act = problem.active_z
    base = summary.block("baseline", "z0")
    for a in cfg.budgets:
        blk = summary.block("delta", "z0", a)
        ratio = np.median(blk.mean_width[act] / base.mean_width[act])
        ref = np.sqrt(chi2_quantile(1, a[1]) / chi2_quantile(1, 0.05))
        print(f"{a}: median width ratio {ratio:.4f} (reference {ref:.4f})")


if __name__ == "__main__":
    main()
