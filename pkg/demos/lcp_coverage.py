"""Coverage study on the random LCP examples at desk scale.

Equivalent to ``pwnci coverage --problem lcp2``; shown here through the
Python API so the per-coordinate blocks can be inspected directly.
"""

import sys

from pwnci.bench import aggregate, coverage_table, default_config, run_experiment


def main(problem="lcp2"):
    cfg = default_config(problem)
    records = run_experiment(cfg)
    summary = aggregate(records, cfg.build_problem())
    print(coverage_table(summary, title=f"{problem}: n={cfg.n}, N={cfg.N}, R={cfg.reps}"))
    z = summary.block("delta", "z0", (0.025, 0.025))
    print("per-coordinate z0 coverage at (0.025, 0.025):", z.coverage.round(3))


if __name__ == "__main__":
    main(*sys.argv[1:2])
