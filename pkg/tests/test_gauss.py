import math
from statistics import NormalDist

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwnci.errors import NotPositiveDefiniteError, SingularBasisError
from pwnci.gauss import (
    CovMatrix,
    SubspaceBasis,
    build_projector,
    chi2_quantile,
    complete_basis,
    delta_general,
    delta_half_width,
    mvn_sample,
    projector_with_coupling,
)

from .oracles import gls_projector, random_instance, random_spd


# ---------------------------------------------------------------- CovMatrix


def test_cov_rejects_asymmetric():
    with pytest.raises(ValueError):
        CovMatrix([[1.0, 0.5], [0.4, 1.0]])


def test_cov_symmetrizes_tiny_asymmetry():
    c = CovMatrix([[2.0, 1.0], [1.0 + 1e-15, 1.0]])
    assert np.array_equal(c.matrix, c.matrix.T)


@pytest.mark.parametrize(
    "m",
    [
        [[1.0, 0.0], [0.0, 0.0]],
        [[1.0, 2.0], [2.0, 1.0]],
        [[1.0, 1.0], [1.0, 1.0]],
        [[np.nan, 0.0], [0.0, 1.0]],
    ],
)
def test_cov_rejects_non_pd(m):
    with pytest.raises(NotPositiveDefiniteError):
        CovMatrix(m)


def test_cov_is_immutable():
    c = CovMatrix(np.eye(2))
    with pytest.raises(ValueError):
        c.matrix[0, 0] = 5.0


# ---------------------------------------------------------------- SubspaceBasis


def test_basis_rank_check():
    with pytest.raises(SingularBasisError):
        SubspaceBasis(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))


def test_basis_trivial_and_full():
    assert SubspaceBasis.trivial(4).dim == 0
    assert SubspaceBasis.full(3).dim == 3
    assert SubspaceBasis.coordinates(4, [True, False, True, False]).dim == 2


def test_complete_basis_makes_nonsingular():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = rng.integers(2, 7)
        k = rng.integers(1, n)
        w1 = rng.standard_normal((n, k))
        w2 = complete_basis(w1)
        assert w2.shape == (n, n - k)
        assert np.linalg.matrix_rank(np.hstack([w1, w2])) == n


def test_complete_basis_coordinate_shortcut_matches_greedy_choice():
    w1 = np.eye(5)[:, [1, 3]]
    assert np.array_equal(complete_basis(w1), np.eye(5)[:, [0, 2, 4]])


# ---------------------------------------------------------------- build_projector


def test_projector_orthonormal_case():
    P = build_projector(SubspaceBasis(np.array([[0.0], [1.0]])), np.eye(2))
    assert np.allclose(P.matrix, [[0, 0], [0, 1]], atol=1e-15)


def test_projector_correlated_case_matches_oracle():
    sigma = np.array([[2.0, 1.0], [1.0, 1.0]])
    E = SubspaceBasis(np.array([[1.0], [0.0]]))
    P = build_projector(E, sigma).matrix
    assert np.allclose(P, gls_projector(E.basis, sigma), atol=1e-14)
    e1 = np.array([1.0, 0.0])
    assert np.allclose(P @ e1, e1)
    assert np.allclose(P @ P, P)
    assert np.allclose(P @ sigma @ (np.eye(2) - P).T, 0.0, atol=1e-14)


def test_projector_edge_dimensions():
    sigma = random_spd(np.random.default_rng(0), 4)
    assert np.array_equal(build_projector(SubspaceBasis.trivial(4), sigma).matrix, np.zeros((4, 4)))
    assert np.array_equal(build_projector(SubspaceBasis.full(4), sigma).matrix, np.eye(4))


def test_projector_rejects_singular_complement():
    E = SubspaceBasis(np.array([[1.0], [0.0]]))
    with pytest.raises(SingularBasisError):
        build_projector(E, np.eye(2), W2=np.array([[2.0], [0.0]]))


def test_projector_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        build_projector(SubspaceBasis.full(2), np.eye(3))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projector_invariants_and_oracle(seed):
    rng = np.random.default_rng(seed)
    E, sigma = random_instance(rng)
    proj = build_projector(E, sigma)
    P = proj.matrix
    n, k = E.dim_ambient, E.dim
    scale = max(np.linalg.norm(P), 1.0)
    assert np.linalg.norm(P @ P - P) <= 1e-10 * scale
    assert np.allclose(P @ E.basis, E.basis, atol=1e-10 * scale)
    assert np.linalg.matrix_rank(P, tol=1e-8 * scale) == k
    assert np.linalg.norm(P @ sigma @ (np.eye(n) - P).T) <= 1e-10 * np.linalg.norm(sigma) * scale
    if k:
        assert np.allclose(P, gls_projector(E.basis, sigma), atol=1e-9 * scale)
    assert np.allclose(proj.cov, P @ sigma @ P.T, atol=1e-9 * np.linalg.norm(sigma) * scale)


def test_basis_independence_over_100_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        E, sigma = random_instance(rng, kmin=1)
        n, k = E.dim_ambient, E.dim
        if k == n:
            continue
        w2a = rng.standard_normal((n, n - k))
        w2b = rng.standard_normal((n, n - k))
        pa = build_projector(E, sigma, W2=w2a).matrix
        pb = build_projector(E, sigma, W2=w2b).matrix
        worst = max(worst, np.abs(pa - pb).max())
    assert worst <= 1e-9


def test_perturbed_coupling_breaks_independence():
    rng = np.random.default_rng(7)
    for _ in range(50):
        E, sigma = random_instance(rng, kmin=1)
        n, k = E.dim_ambient, E.dim
        if k == n:
            continue
        w1 = E.basis
        w2 = complete_basis(w1)
        w = np.hstack([w1, w2])
        winv = np.linalg.inv(w)
        st_ = winv @ sigma @ winv.T
        B = st_[:k, k:] @ np.linalg.inv(st_[k:, k:])
        P = projector_with_coupling(E, w2, B)
        ident = lambda M: np.linalg.norm(M @ sigma @ (np.eye(n) - M).T)
        assert ident(P) <= 1e-10 * np.linalg.norm(sigma) * max(1, np.linalg.norm(P))
        D = rng.standard_normal(B.shape)
        for eps in (1e-3, 1e-1):
            Pe = projector_with_coupling(E, w2, B + eps * D)
            assert ident(Pe) > 1e-6 * eps * np.linalg.norm(sigma)


def test_projector_continuity_in_sigma():
    rng = np.random.default_rng(3)
    E, sigma = random_instance(rng, kmin=1, nmin=3)
    D = rng.standard_normal(sigma.shape)
    D = D + D.T
    base = build_projector(E, sigma).matrix
    diffs = []
    for eps in (1e-2, 1e-4, 1e-6):
        diffs.append(np.linalg.norm(build_projector(E, sigma + eps * D).matrix - base) / eps)
    assert diffs[-1] < 10 * max(diffs[0], 1e-12) + 1e-6
    assert np.linalg.norm(build_projector(E, sigma + 1e-9 * D).matrix - base) < 1e-6


def test_zero_row_dichotomy():
    rng = np.random.default_rng(11)
    n = 5
    E = SubspaceBasis(np.eye(n)[:, [0, 1, 2]])
    H = np.diag([1.0, 0.0, 1.0, 0.0, 0.0])
    pattern = None
    for _ in range(30):
        P = build_projector(E, random_spd(rng, n)).matrix
        zero = np.all(np.abs(H @ P) < 1e-14, axis=1)
        pattern = zero if pattern is None else pattern
        assert np.array_equal(zero, pattern)
    assert pattern.tolist() == [False, True, False, True, True]


# ---------------------------------------------------------------- chi-square


def _chi2_oracle_bisect(dof, alpha):
    """Bisection on the regularized upper incomplete gamma in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    upper = lambda x: mpmath.gammainc(mpmath.mpf(dof) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True)
    lo, hi = mpmath.mpf(0), mpmath.mpf(10 * dof + 200)
    for _ in range(200):
        mid = (lo + hi) / 2
        if upper(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


@pytest.mark.parametrize("alpha", [0.5, 0.1, 0.05, 0.025, 0.01, 1e-4])
def test_chi2_dof1_against_normal_quantile(alpha):
    oracle = NormalDist().inv_cdf(1 - alpha / 2) ** 2
    assert chi2_quantile(1, alpha) == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 0.1, 0.05, 0.01, 1e-6])
def test_chi2_dof2_closed_form(alpha):
    assert chi2_quantile(2, alpha) == pytest.approx(-2 * math.log(alpha), rel=1e-10)


@pytest.mark.parametrize("dof", [1, 3, 5, 10, 30, 40])
@pytest.mark.parametrize("alpha", [0.05, 0.025, 0.01])
def test_chi2_general_dof_against_incomplete_gamma_bisection(dof, alpha):
    assert chi2_quantile(dof, alpha) == pytest.approx(_chi2_oracle_bisect(dof, alpha), rel=1e-10)


def test_chi2_known_values_and_limit():
    assert chi2_quantile(1, 0.05) == pytest.approx(3.841459, abs=1e-6)
    assert chi2_quantile(2, 0.05) == pytest.approx(5.991465, abs=1e-6)
    assert chi2_quantile(2, 1 - 1e-12) < 1e-10


@pytest.mark.parametrize("dof,alpha", [(0, 0.05), (1.5, 0.05), (2, 0.0), (2, 1.0), (2, -0.1)])
def test_chi2_rejects_bad_input(dof, alpha):
    with pytest.raises(ValueError):
        chi2_quantile(dof, alpha)


# ---------------------------------------------------------------- half-widths


def test_delta_identity_full_space():
    n = 4
    P = build_projector(SubspaceBasis.full(n), np.eye(n))
    expected = NormalDist().inv_cdf(0.975)
    assert np.allclose(delta_half_width(P, 0.05), expected, rtol=1e-10)
    assert delta_half_width(P, 0.05, j=2) == pytest.approx(1.95996, abs=1e-5)


def test_delta_zero_when_subspace_misses_coordinate():
    rng = np.random.default_rng(5)
    sigma = random_spd(rng, 4)
    P = build_projector(SubspaceBasis.coordinates(4, [0, 2]), sigma)
    d = delta_half_width(P, 0.1)
    assert d[1] == 0.0 and d[3] == 0.0
    assert d[0] > 0 and d[2] > 0
    assert np.all(P.matrix[[1, 3]] == 0.0)


def test_delta_rejects_bad_alpha():
    P = build_projector(SubspaceBasis.full(2), np.eye(2))
    with pytest.raises(ValueError):
        delta_half_width(P, 1.0)
    with pytest.raises(ValueError):
        delta_general(np.eye(2), [1.0, 0.0], 0.0)


def test_delta_general_trivial_cases():
    assert delta_general(np.eye(3), np.zeros(3), 0.05) == 0.0
    assert delta_general(np.eye(3), [0.0, 1.0, 0.0], 0.05) == pytest.approx(math.sqrt(chi2_quantile(1, 0.05)))


def test_delta_general_coincides_with_delta_half_width():
    rng = np.random.default_rng(9)
    for _ in range(50):
        E, sigma = random_instance(rng)
        proj = build_projector(E, sigma)
        a = delta_half_width(proj, 0.05)
        b = delta_general(sigma, proj.matrix, 0.05)
        assert np.allclose(a, b, rtol=1e-8, atol=1e-12)


def test_delta_strictly_decreasing_in_alpha():
    rng = np.random.default_rng(4)
    E, sigma = random_instance(rng, kmin=1)
    proj = build_projector(E, sigma)
    alphas = [0.01, 0.025, 0.05, 0.1, 0.2]
    widths = np.array([delta_half_width(proj, a) for a in alphas])
    nz = widths[0] > 0
    assert np.all(np.diff(widths[:, nz], axis=0) < 0)


# ---------------------------------------------------------------- sampling


def test_mvn_sample_reproducible():
    a = mvn_sample(np.eye(2), np.random.default_rng(42))
    b = mvn_sample(np.eye(2), np.random.default_rng(42))
    assert np.array_equal(a, b)
    assert a.shape == (2,)


def test_mvn_sample_covariance():
    sigma = np.array([[2.0, 1.0], [1.0, 1.0]])
    y = mvn_sample(sigma, np.random.default_rng(0), size=100_000)
    assert np.allclose(np.cov(y, rowvar=False), sigma, rtol=0.05)
    y1 = mvn_sample([[4.0]], np.random.default_rng(1), size=100_000)
    assert np.var(y1) == pytest.approx(4.0, rel=0.05)


def test_delta_coverage_identity_monte_carlo():
    rng = np.random.default_rng(77)
    for alpha in (0.05, 0.1):
        E, sigma = random_instance(rng, kmin=1, nmin=3)
        proj = build_projector(E, sigma)
        d = delta_half_width(proj, alpha)
        j = int(np.argmax(d))
        y = mvn_sample(sigma, rng, size=100_000)
        py = y @ proj.matrix.T
        assert np.mean(np.abs(py[:, j]) <= d[j]) == pytest.approx(1 - alpha, abs=0.01)


def test_cone_conditioned_coverage():
    # cone with lineality space E = span(e1, e2): signs fixed on coordinates 3, 4
    rng = np.random.default_rng(123)
    n = 4
    sigma = random_spd(rng, n)
    E = SubspaceBasis.coordinates(n, [0, 1])
    proj = build_projector(E, sigma)
    alpha = 0.1
    d = delta_half_width(proj, alpha)
    y = mvn_sample(sigma, rng, size=400_000)
    in_cone = (y[:, 2] >= 0) & (y[:, 3] <= 0)
    py = y[in_cone] @ proj.matrix.T
    for j in (0, 1):
        assert np.mean(np.abs(py[:, j]) <= d[j]) == pytest.approx(1 - alpha, abs=0.015)
