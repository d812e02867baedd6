"""Monte Carlo check of exact intervals for a piecewise normal model.

The model has two pieces (the normal map of a 2x2 matrix on the cone
R_+ x {0}), so its lineality space is {0} x R.  Draw Z, build the interval
from that single draw and count how often it covers the true center.
"""

import numpy as np

from pwnci import BoxSet, PiecewiseNormalModel, normal_map_pieces


def main(draws=10_000, seed=0):
    L = np.array([[1.0, 0.5], [1.0, 2.0]])
    gamma = normal_map_pieces(L, BoxSet([0.0, 0.0], [np.inf, 0.0]))
    sigma = np.array([[0.3312, 0.0205], [0.0205, 0.0855]])
    model = PiecewiseNormalModel(gamma, sigma, a0=np.zeros(2), center=np.array([0.0, -0.5]))
    Z = model.sample_z(np.random.default_rng(seed), draws)
    for alpha in (0.10, 0.05):
        hits = np.array([model.exact_ci(z, alpha).covers(model.center) for z in Z])
        print(f"alpha={alpha:.2f}: coverage {hits.mean(axis=0)} (nominal {1 - alpha:.2f})")
    print("example interval:\n" + model.exact_ci(Z[0], 0.05).format())


if __name__ == "__main__":
    main()
