import itertools

import numpy as np
import pytest

from pwnci.bench.matrixio import load_saa_file
from pwnci.gauss import SubspaceBasis, build_projector, chi2_quantile, mvn_sample
from pwnci.inference import (
    ConfidenceRegion,
    anchor_in,
    ci_x0,
    ci_z0,
    confidence_region,
    infer,
    lambda_hat,
    select_cell,
)
from pwnci.polyhedral import BoxSet, Cell, Sign, cell_of_point, cell_ranges, face_projection_data, normal_map_pieces
from pwnci.pwnormal import PiecewiseNormalModel
from pwnci.svi import SaaData, SaaSolution, jacobian_MN, solve_from_data

from .oracles import brute_force_face_min, gls_projector, random_spd


@pytest.fixture(scope="module")
def worked():
    d = load_saa_file("worked")
    S = BoxSet(d["lower"], d["upper"])
    return solve_from_data(SaaData(d["A_bar"], d["b_bar"]), S, N=d["N"], sigma=d["sigma_N"])


def test_worked_solution(worked):
    assert np.allclose(worked.z, [0.0293, -0.5475], atol=1e-3)
    assert np.allclose(worked.x, [0.0293, 0.0], atol=1e-3)
    assert np.array_equal(worked.M, [[0.9971, 0.0], [0.9721, 1.0]])
    assert worked.cell.pattern == (Sign.PLUS, Sign.MINUS)


def test_worked_region_shape(worked):
    Q = confidence_region(worked, 0.05)
    ref = np.array([[12.8464, 10.8122], [10.8122, 11.8753]])
    assert np.all(np.abs(Q.shape - ref) <= 5e-3)
    assert Q.threshold == pytest.approx(chi2_quantile(2, 0.05) / 100)


def test_worked_lambda(worked):
    lam = lambda_hat(worked).matrix
    assert np.allclose(lam, [[0.3331, -0.3033], [-0.3033, 0.3603]], atol=5e-4)
    Q = confidence_region(worked, 0.05)
    assert np.allclose(np.linalg.inv(Q.shape), lam, atol=1e-12)


def test_worked_cell_and_intervals(worked):
    res = infer(worked, 0.05, 0.05)
    assert res.cell.pattern == (Sign.ZERO, Sign.MINUS)
    assert np.allclose(res.z.center, [0.0, -0.5208], atol=1e-3)
    assert res.z.half_widths[0] == 0.0 and res.z.center[0] == 0.0
    assert res.z.lower[1] == pytest.approx(-0.5777, abs=1e-3)
    assert res.z.upper[1] == pytest.approx(-0.4640, abs=1e-3)
    assert np.array_equal(res.x.center, [0.0, 0.0])
    assert np.array_equal(res.x.half_widths, [0.0, 0.0])
    assert res.z.level == pytest.approx(0.90)


def test_lambda_simple_cases():
    S = BoxSet.orthant(2)
    sig = np.array([[2.0, 0.3], [0.3, 1.0]])
    sol = SaaSolution.from_parts([1.0, 2.0], np.eye(2), sig, 10, S)
    assert np.allclose(lambda_hat(sol).matrix, sig)
    sol = SaaSolution.from_parts([1.0, 2.0], np.diag([2.0, 4.0]), np.diag([1.0, 8.0]), 10, S)
    assert np.allclose(lambda_hat(sol).matrix, np.diag([0.25, 0.5]))


def test_unit_region():
    S = BoxSet.orthant(3)
    sol = SaaSolution.from_parts([1.0, 2.0, 3.0], np.eye(3), np.eye(3), 1, S)
    Q = confidence_region(sol, 0.1)
    assert np.array_equal(Q.shape, np.eye(3))
    assert Q.threshold == pytest.approx(chi2_quantile(3, 0.1))
    assert np.allclose(Q.extent, np.sqrt(chi2_quantile(3, 0.1)))


def test_select_cell_interior_region():
    S = BoxSet.orthant(2)
    Q = ConfidenceRegion(np.array([3.0, -3.0]), np.eye(2), 0.01)
    P = cell_of_point(S, Q.center)
    assert select_cell(Q, P, S).pattern == P.pattern


def test_select_cell_large_radius_pins_everything():
    S = BoxSet.orthant(2)
    Q = ConfidenceRegion(np.array([0.2, 0.1]), np.array([[2.0, 0.5], [0.5, 1.0]]), 100.0)
    C = select_cell(Q, cell_of_point(S, Q.center), S)
    assert C.pattern == (Sign.ZERO, Sign.ZERO) and C.dim == 0
    assert Q.contains(np.zeros(2))


def _oracle_max_pins(Q, P, S):
    """Largest number of pinnable coordinates whose face meets Q, by brute force."""
    z = Q.center
    lo, hi = cell_ranges(S, P)
    face = np.zeros(S.dim)
    best = 0
    for k in range(S.dim, 0, -1):
        for J in itertools.combinations(range(S.dim), k):
            pinned = np.zeros(S.dim, bool)
            pinned[list(J)] = True
            if brute_force_face_min(Q.shape, z, lo, hi, pinned, face) <= Q.threshold * (1 + 1e-6):
                return k
    return best


def _random_region(rng, n):
    z = rng.normal(0, 0.5, n)
    shape = np.linalg.inv(random_spd(rng, n))
    thr = chi2_quantile(n, 0.05) * rng.uniform(0.05, 0.5)
    return ConfidenceRegion(z, shape, thr)


@pytest.mark.parametrize("seed", range(40))
def test_select_cell_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    S = BoxSet.orthant(n)
    Q = _random_region(rng, n)
    P = cell_of_point(S, Q.center)
    C = select_cell(Q, P, S)
    pinned = C.flat_mask
    lo, hi = cell_ranges(S, P)
    # the selected face meets Q and no face with more pinned coordinates does
    assert brute_force_face_min(Q.shape, Q.center, lo, hi, pinned, np.zeros(n)) <= Q.threshold * (1 + 1e-6)
    assert pinned.sum() == _oracle_max_pins(Q, P, S)


def _random_solution(rng, n):
    S = BoxSet.orthant(n)
    z = rng.normal(0, 0.3, n)
    A = random_spd(rng, n) + np.eye(n)
    sig = random_spd(rng, n)
    return SaaSolution.from_parts(z, jacobian_MN(A, z, S), sig, 200, S)


@pytest.mark.parametrize("seed", range(5))
def test_anchor_invariance(seed):
    rng = np.random.default_rng(100 + seed)
    sol = _random_solution(rng, 4)
    C = select_cell(confidence_region(sol, 0.1), sol.cell, sol.set)
    base_z = ci_z0(sol, C, 0.05)
    base_x = ci_x0(sol, C, sol.set, 0.05)
    lo, hi = cell_ranges(sol.set, C)
    for _ in range(20):
        a0 = np.where(C.flat_mask, 0.0, np.clip(rng.normal(0, 2, sol.n), lo, hi))
        rz = ci_z0(sol, C, 0.05, a0=a0)
        rx = ci_x0(sol, C, sol.set, 0.05, a0=a0)
        assert np.allclose(rz.center, base_z.center, atol=1e-10)
        assert np.allclose(rz.half_widths, base_z.half_widths, atol=1e-10)
        assert np.allclose(rx.center, base_x.center, atol=1e-10)
        assert np.allclose(rx.half_widths, base_x.half_widths, atol=1e-10)


def test_anchor_in_snaps_pinned_coordinates():
    S = BoxSet([0.0, 0.0], [1.0, np.inf])
    C = Cell((Sign.UPPER, Sign.ZERO))
    assert np.array_equal(anchor_in(C, S, [1.4, -0.3]), [1.0, 0.0])


def test_width_ordering_in_alpha():
    sol = _random_solution(np.random.default_rng(7), 4)
    C = sol.cell
    widths = [ci_z0(sol, C, a).half_widths for a in (0.01, 0.05, 0.1, 0.2)]
    for w1, w2 in zip(widths, widths[1:]):
        assert np.all(w1 > w2)


def test_full_cell_reduces_to_lambda_diagonal():
    sol = _random_solution(np.random.default_rng(8), 3)
    rep = ci_z0(sol, sol.cell, 0.05)
    lam = lambda_hat(sol).matrix
    assert np.allclose(rep.center, sol.z)
    assert np.allclose(rep.half_widths, np.sqrt(chi2_quantile(1, 0.05) * np.diag(lam) / sol.N))


def test_all_plus_cell_x_matches_z():
    S = BoxSet.orthant(3)
    sol = SaaSolution.from_parts([0.5, 1.0, 2.0], np.eye(3) * 2, random_spd(np.random.default_rng(9), 3), 50, S)
    rz = ci_z0(sol, sol.cell, 0.05)
    rx = ci_x0(sol, sol.cell, S, 0.05)
    assert np.allclose(rx.center, rz.center)
    assert np.allclose(rx.half_widths, rz.half_widths)


def test_composite_projector_counterexample():
    sig = np.array([[1.0, 0.5], [0.5, 1.0]])
    S = BoxSet([0.0, -np.inf], [0.0, np.inf])
    C = Cell((Sign.FIXED, Sign.PLUS))
    fp = face_projection_data(S, C)
    assert fp.keep.tolist() == [False, True]
    proj_E = build_projector(C.parallel_space(), sig)
    assert np.allclose(proj_E.matrix, np.eye(2))
    composite = fp.keep[:, None] * proj_E.matrix
    assert np.allclose(composite, np.diag([0.0, 1.0]))
    oblique_H = gls_projector(SubspaceBasis.coordinates(2, fp.keep).basis, sig)
    assert not np.allclose(composite, oblique_H)


def test_pipeline_matches_piecewise_normal_asymptotics():
    A = np.array([[1.0, 0.5], [1.0, 2.0]])
    S = BoxSet.orthant(2)
    z0 = np.array([0.0, -0.5])
    sig = np.array([[0.3312, 0.0205], [0.0205, 0.0855]])
    gamma = normal_map_pieces(A, BoxSet([0.0, 0.0], [np.inf, 0.0]))
    model = PiecewiseNormalModel(gamma, sig, np.zeros(2), z0)
    C = Cell((Sign.ZERO, Sign.MINUS))
    rng = np.random.default_rng(12)
    N = 400
    for y in mvn_sample(sig, rng, 50):
        z_N = z0 + gamma.inverse(y) / np.sqrt(N)
        sol = SaaSolution.from_parts(z_N, jacobian_MN(A, z_N, S), sig, N, S)
        got = ci_z0(sol, C, 0.1)
        ref = model.asymptotic_ci(z_N, 0.1, N)
        assert np.allclose(got.center, ref.center, atol=1e-12)
        assert np.allclose(got.half_widths, ref.half_widths, atol=1e-12)


def test_ci_x0_on_full_cell_with_minus_coordinate():
    S = BoxSet.orthant(2)
    sol = SaaSolution.from_parts([0.7, -0.4], np.array([[2.0, 0.0], [0.5, 1.0]]), np.eye(2), 100, S)
    rx = ci_x0(sol, sol.cell, S, 0.05)
    assert rx.center[1] == 0.0 and rx.half_widths[1] == 0.0
    assert rx.center[0] == pytest.approx(0.7)
    assert rx.half_widths[0] > 0
