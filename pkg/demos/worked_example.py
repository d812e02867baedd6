"""Single-shot inference on the bundled two-dimensional LCP.

Run with ``python demos/worked_example.py``.  Solves the SAA problem from
the stored sample means, builds the confidence region, selects the cell and
prints intervals for z0 and x0.
"""

import numpy as np

from pwnci import BoxSet, SaaData, infer, lambda_hat, solve_from_data
from pwnci.bench.matrixio import load_saa_file


def main():
    d = load_saa_file("worked")
    S = BoxSet(d["lower"], d["upper"])
    sol = solve_from_data(SaaData(d["A_bar"], d["b_bar"]), S, N=d["N"], sigma=d["sigma_N"])
    np.set_printoptions(precision=4, suppress=True)
    print("z_N =", sol.z, " x_N =", sol.x, " cell:", sol.cell.label)
    print("M_N =\n", sol.M)
    print("Lambda_N =\n", lambda_hat(sol).matrix)

    res = infer(sol, alpha1=0.05, alpha2=0.05)
    print("region shape =\n", res.region.shape)
    print("selected cell:", res.cell.label, "(dim", res.cell.dim, ")")
    print("z estimate:", res.z.center)
    print("90% intervals for z0:\n" + res.z.format())
    print("90% intervals for x0:\n" + res.x.format())


if __name__ == "__main__":
    main()
