"""Affine stochastic variational inequalities over boxes and their sample
average approximations.

The problem is ``0 in f0(x) + N_S(x)`` with ``f0(x) = E[A(xi) x + b(xi)]``.
Its normal-map form is ``f0(Pi_S(z)) + z - Pi_S(z) = 0`` with ``x = Pi_S(z)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, DegenerateSolutionError, RayTerminationError
from .gauss import CovMatrix
from .polyhedral import BoxSet, Cell, cell_of_point, default_tolerance


@dataclass(frozen=True)
class AffineDraws:
    """``N`` i.i.d. realizations of ``F(x, xi) = A(xi) x + b(xi)``.

    ``A`` is either an ``(N, n, n)`` stack or a single ``(n, n)`` matrix when
    ``A(xi)`` is deterministic.
    """

    A: np.ndarray
    b: np.ndarray

    @property
    def N(self) -> int:
        return self.b.shape[0]

    @property
    def n(self) -> int:
        return self.b.shape[1]

    @property
    def A_constant(self) -> bool:
        return self.A.ndim == 2

    def mean_A(self) -> np.ndarray:
        return self.A if self.A_constant else self.A.mean(axis=0)

    def mean_b(self) -> np.ndarray:
        return self.b.mean(axis=0)

    def values_at(self, x) -> np.ndarray:
        """``F(x, xi^i)`` for every draw, shape ``(N, n)``."""
        return self.b + self.A @ np.asarray(x, dtype=float)


Sampler = Callable[[np.random.Generator, int], AffineDraws]


@dataclass(frozen=True)
class SviProblem:
    """Affine SVI with box constraints and, optionally, its known solution.

    Attributes
    ----------
    name : str
    set : BoxSet
    sampler : callable
        ``sampler(rng, N)`` returns :class:`AffineDraws`.
    A_mean, b_mean : ndarray
        ``E[A(xi)]`` and ``E[b(xi)]``.
    z0, x0 : ndarray or None
        True normal-map and VI solutions.
    active_z, active_x : ndarray of bool or None
        Coordinates where ``z0`` (``x0``) is nonzero.
    bandwidth : int or None
        Half bandwidth of ``A`` when it is banded.
    """

    name: str
    set: BoxSet
    sampler: Sampler = field(repr=False)
    A_mean: np.ndarray = field(repr=False)
    b_mean: np.ndarray = field(repr=False)
    z0: np.ndarray | None = field(default=None, repr=False)
    x0: np.ndarray | None = field(default=None, repr=False)
    active_z: np.ndarray | None = field(default=None, repr=False)
    active_x: np.ndarray | None = field(default=None, repr=False)
    bandwidth: int | None = None

    @property
    def n(self) -> int:
        return self.set.dim

    def sample(self, rng: np.random.Generator, N: int) -> AffineDraws:
        return self.sampler(rng, N)

    def truth_residual(self) -> float:
        """Normal-map residual of the stored ``z0`` under the true means."""
        if self.z0 is None:
            raise ValueError("problem has no stored truth")
        return float(np.max(np.abs(normal_map(self.A_mean, self.b_mean, self.set, self.z0))))


def _uniform_sampler(A_lo, A_hi, b_lo, b_hi, A_const=None):
    A_lo = None if A_lo is None else np.asarray(A_lo, dtype=float)
    A_hi = None if A_hi is None else np.asarray(A_hi, dtype=float)
    b_lo = np.asarray(b_lo, dtype=float)
    b_hi = np.asarray(b_hi, dtype=float)
    n = b_lo.size

    def sample(rng: np.random.Generator, N: int) -> AffineDraws:
        if N < 1:
            raise ValueError("sample size must be at least 1")
        if A_const is not None:
            A = A_const
        else:
            A = A_lo + (A_hi - A_lo) * rng.random((N, n, n))
        b = b_lo + (b_hi - b_lo) * rng.random((N, n))
        return AffineDraws(A, b)

    return sample


def _with_truth(name, S, sampler, A_mean, b_mean, x0, bandwidth=None):
    x0 = np.asarray(x0, dtype=float)
    tol = 1e-12
    z0 = x0 - (A_mean @ x0 + b_mean)
    z0[np.abs(z0) <= tol] = 0.0
    return SviProblem(
        name=name,
        set=S,
        sampler=sampler,
        A_mean=A_mean,
        b_mean=b_mean,
        z0=z0,
        x0=x0,
        active_z=np.abs(z0) > tol,
        active_x=np.abs(x0) > tol,
        bandwidth=bandwidth,
    )


def _lcp_A_ranges(n):
    iu = np.triu(np.ones((n, n)), 1)
    il = np.tril(np.ones((n, n)), -1)
    hi = 4.0 * np.eye(n) + 3.0 * iu + 2.0 * il
    return np.zeros((n, n)), hi


def lcp_example(example: int, n: int = 30) -> SviProblem:
    """Random LCP over ``R^n_+`` with ``F(x, xi) = A(xi) x + b(xi)``.

    ``A(xi)`` has independent entries: ``U(0,4)`` on the diagonal, ``U(0,3)``
    above and ``U(0,2)`` below it, so ``E[A]`` has 2 / 1.5 / 1.  The true VI
    solution is ``x0 = (0.2, 0.4, 0, ...)`` for examples 2 and 3 and ``0``
    for example 1.  ``b(xi)`` is uniform with width 2 on every coordinate
    except the trailing block of example 2:

    * example 1: ``U(-1, 1)`` everywhere, so ``z0 = 0``.
    * example 2: ``U(-2, 0)`` on the first two coordinates, ``U(-1, 1)`` up
      to coordinate ``k = max(n // 3, 2)`` and ``U(-1, -0.2)`` after it,
      giving ``z0 = (0.2, 0.4, -0.6, ..., -0.6, 0, ..., 0)`` with ``n - k``
      trailing zeros.
    * example 3: ``U(-2, 0)`` on the first two, ``U(-1, 1)`` on the rest,
      giving ``z0 = (0.2, 0.4, -0.6, ..., -0.6)``.
    """
    if example not in (1, 2, 3):
        raise ValueError(f"unknown LCP example {example}")
    if n < 3:
        raise ValueError("LCP examples need n >= 3")
    A_lo, A_hi = _lcp_A_ranges(n)
    b_lo = np.full(n, -1.0)
    b_hi = np.full(n, 1.0)
    x0 = np.zeros(n)
    if example in (2, 3):
        b_lo[:2], b_hi[:2] = -2.0, 0.0
        x0[:2] = 0.2, 0.4
    if example == 2:
        k = max(n // 3, 2)
        b_lo[k:], b_hi[k:] = -1.0, -0.2
    S = BoxSet.orthant(n)
    sampler = _uniform_sampler(A_lo, A_hi, b_lo, b_hi)
    return _with_truth(f"lcp{example}", S, sampler, 0.5 * (A_lo + A_hi), 0.5 * (b_lo + b_hi), x0)


def qp_matrix(n: int, diag: float = 4.0, off: float = 1.0) -> np.ndarray:
    return diag * np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))


def qp_example(n: int = 300) -> SviProblem:
    """Convex QP ``min 1/2 x'Mx + E[q]'x`` over ``R^n_+`` in three equal blocks.

    ``M`` is tridiagonal (4 on the diagonal, 1 beside it) and deterministic.
    ``E[q]`` is chosen so that ``x0 = (1, .., 1, 0, .., 0)`` (first block) and
    ``z0 = (1_k, -1_k, 0_k)``; each ``q_j`` is uniform of width 2 about its
    mean.  The last block is degenerate (``z0_j = x0_j = 0``), so the
    derivative of the normal map at ``z0`` is genuinely piecewise linear.
    """
    if n % 3:
        raise ValueError("QP example needs n divisible by 3")
    k = n // 3
    M = qp_matrix(n)
    x0 = np.zeros(n)
    x0[:k] = 1.0
    z0 = np.concatenate([np.ones(k), -np.ones(k), np.zeros(k)])
    q_mean = (x0 - z0) - M @ x0
    sampler = _uniform_sampler(None, None, q_mean - 1.0, q_mean + 1.0, A_const=M)
    return _with_truth("qp", BoxSet.orthant(n), sampler, M, q_mean, x0, bandwidth=1)


def worked_example_problem() -> SviProblem:
    """Two-dimensional LCP with ``E[A] = [[1, 1/2], [1, 2]]``, ``E[b] = (0, 0.5)``.

    Only the means are fixed; the sampler adds independent ``U(-1, 1)`` noise
    to ``b`` so that the problem can be simulated.
    """
    A = np.array([[1.0, 0.5], [1.0, 2.0]])
    b = np.array([0.0, 0.5])
    sampler = _uniform_sampler(None, None, b - 1.0, b + 1.0, A_const=A)
    return _with_truth("worked", BoxSet.orthant(2), sampler, A, b, np.zeros(2))


PROBLEMS = {
    "lcp1": lambda n: lcp_example(1, n),
    "lcp2": lambda n: lcp_example(2, n),
    "lcp3": lambda n: lcp_example(3, n),
    "qp": qp_example,
    "worked": lambda n: worked_example_problem(),
}


DEFAULT_DIMS = {"qp": 300, "worked": 2}


def make_problem(name: str, n: int | None = None) -> SviProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(DEFAULT_DIMS.get(name, 10) if n is None else n)


def from_definition(definition: dict) -> SviProblem:
    """Custom affine problem from a mapping (e.g. parsed JSON).

    Keys: ``name``; ``A_low``/``A_high`` (n x n entrywise uniform ranges) or
    ``A`` (constant); ``b_low``/``b_high``; optional ``lower``/``upper``
    bounds (default: the orthant, ``null`` meaning infinite) and
    ``bandwidth``.  The true solution is computed from the means.
    """
    b_lo = np.asarray(definition["b_low"], dtype=float)
    b_hi = np.asarray(definition["b_high"], dtype=float)
    n = b_lo.size
    if "A" in definition:
        A = np.asarray(definition["A"], dtype=float)
        sampler = _uniform_sampler(None, None, b_lo, b_hi, A_const=A)
        A_mean = A
    else:
        A_lo = np.asarray(definition["A_low"], dtype=float)
        A_hi = np.asarray(definition["A_high"], dtype=float)
        sampler = _uniform_sampler(A_lo, A_hi, b_lo, b_hi)
        A_mean = 0.5 * (A_lo + A_hi)
    bound = lambda key, inf: np.array(
        [inf if v is None else float(v) for v in definition.get(key, [None] * n)]
    )
    lower = bound("lower", -np.inf) if "lower" in definition else np.zeros(n)
    upper = bound("upper", np.inf)
    S = BoxSet(lower, upper)
    b_mean = 0.5 * (b_lo + b_hi)
    z0, x0 = solve_normal_map(A_mean, b_mean, S)
    return SviProblem(
        name=definition.get("name", "custom"),
        set=S,
        sampler=sampler,
        A_mean=A_mean,
        b_mean=b_mean,
        z0=z0,
        x0=x0,
        active_z=np.abs(z0) > 1e-12,
        active_x=np.abs(x0) > 1e-12,
        bandwidth=definition.get("bandwidth"),
    )


def load_problem(path) -> SviProblem:
    with open(path) as fh:
        return from_definition(json.load(fh))


@dataclass(frozen=True)
class SaaData:
    """Sample-average data ``(A_bar, b_bar)`` with the draws they came from."""

    A_bar: np.ndarray
    b_bar: np.ndarray
    draws: AffineDraws | None = None

    @property
    def N(self) -> int | None:
        return None if self.draws is None else self.draws.N


def assemble_saa(problem: SviProblem, N: int, rng: np.random.Generator) -> SaaData:
    """Draw ``N`` samples and average them; draws are kept for ``Sigma_N``."""
    draws = problem.sample(rng, N)
    return SaaData(draws.mean_A(), draws.mean_b(), draws)


def normal_map(A, b, S: BoxSet, z) -> np.ndarray:
    """``A Pi_S(z) + b + z - Pi_S(z)``."""
    x = S.project(z)
    return A @ x + b + z - x


def _pattern(S: BoxSet, z):
    """Per-coordinate state: 0 free, -1 at/below lower, +1 at/above upper."""
    st = np.zeros(z.size, dtype=np.int8)
    st[z <= S.lower] = -1
    st[z >= S.upper] = 1
    st[S.lower == S.upper] = -1
    return st


def _pattern_solve(A, b, S, st, bandwidth):
    """Solve the linear system of the normal map on the piece given by ``st``."""
    n = b.size
    free = st == 0
    c = np.where(st < 0, S.lower, np.where(st > 0, S.upper, 0.0))
    c = np.where(free, 0.0, c)
    rhs = c - A @ c - b
    M = A * free[None, :]
    pinned = np.flatnonzero(~free)
    M[pinned, pinned] += 1.0
    if bandwidth is not None:
        ab = np.zeros((2 * bandwidth + 1, n))
        for k in range(-bandwidth, bandwidth + 1):
            d = np.diagonal(M, k)
            if k >= 0:
                ab[bandwidth - k, k:] = d
            else:
                ab[bandwidth - k, : n + k] = d
        return sla.solve_banded((bandwidth, bandwidth), ab, rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        return sla.solve(M, rhs)


def _consistent(S, st, z, tol):
    free = st == 0
    fixed = S.lower == S.upper
    at_lo = (st < 0) & ~fixed
    at_hi = (st > 0) & ~fixed
    lo_ok = np.all(z[at_lo] <= S.lower[at_lo] + tol)
    hi_ok = np.all(z[at_hi] >= S.upper[at_hi] - tol)
    in_ok = np.all(z[free] >= S.lower[free] - tol) and np.all(z[free] <= S.upper[free] + tol)
    return lo_ok and hi_ok and in_ok


def solve_normal_map(A, b, S: BoxSet, start=None, *, bandwidth=None, tol=1e-10, max_iter=None):
    """Solve ``A Pi_S(z) + b + z - Pi_S(z) = 0`` by semismooth Newton.

    Each step fixes the active pattern of the current ``z`` and solves the
    linear system of that piece.  When a pattern repeats, the step is damped
    by backtracking on the residual norm.

    Returns
    -------
    z, x : ndarray
        Normal-map solution and ``x = Pi_S(z)``.

    Raises
    ------
    ConvergenceError
        If no consistent pattern is found within ``max_iter`` steps or a
        pattern system is singular.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.size
    z = -b.copy() if start is None else np.asarray(start, dtype=float).copy()
    max_iter = max_iter if max_iter is not None else 50 + 10 * n
    scale = 1.0 + np.max(np.abs(b), initial=0.0)
    seen = set()
    damped = False
    res = normal_map(A, b, S, z)
    for _ in range(max_iter):
        st = _pattern(S, z)
        try:
            z_new = _pattern_solve(A, b, S, st, bandwidth)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ConvergenceError("singular pattern system") from exc
        if not np.all(np.isfinite(z_new)):
            raise ConvergenceError("singular pattern system")
        key = st.tobytes()
        if _consistent(S, st, z_new, default_tolerance(z_new)):
            z = z_new
            res = normal_map(A, b, S, z)
            if np.max(np.abs(res)) <= tol * scale:
                return z, S.project(z)
        damped = damped or key in seen
        seen.add(key)
        if not damped:
            z = z_new
            res = normal_map(A, b, S, z)
            continue
        f0 = float(res @ res)
        d = z_new - z
        t = 1.0
        while t > 1e-12:
            cand = z + t * d
            r = normal_map(A, b, S, cand)
            if float(r @ r) <= (1.0 - 1e-4 * t) * f0:
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed; the normal map may not be a homeomorphism")
        z, res = cand, r
        if np.max(np.abs(res)) <= tol * scale:
            return z, S.project(z)
    raise ConvergenceError(f"no consistent active pattern after {max_iter} steps")


def solve_lcp_lemke(M, q, max_iter=None) -> np.ndarray:
    """Solve ``x >= 0, Mx + q >= 0, x'(Mx + q) = 0`` by Lemke's method.

    Uses the covering vector of ones and a lexicographic ratio test.

    Raises
    ------
    RayTerminationError
        If the method ends on a secondary ray.
    """
    M = np.asarray(M, dtype=float)
    q = np.asarray(q, dtype=float)
    n = q.size
    if np.all(q >= 0):
        return np.zeros(n)
    # columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1)
    T = np.hstack([np.eye(n), -M, -np.ones((n, 1)), q[:, None]])
    basis = list(range(n))
    z0 = 2 * n
    max_iter = max_iter or 50 * (n + 1) ** 2

    def pivot(r, c):
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T[:] -= np.outer(col, T[r])

    r = int(np.argmin(q))
    pivot(r, z0)
    leaving = basis[r]
    basis[r] = z0
    for _ in range(max_iter):
        enter = leaving + n if leaving < n else leaving - n
        col = T[:, enter]
        scale = max(1.0, np.abs(col).max())
        rows = np.flatnonzero(col > 1e-12 * scale)
        if rows.size == 0:
            raise RayTerminationError("Lemke's method terminated on a secondary ray")
        cand = rows
        for k in [2 * n + 1] + list(range(n)):
            ratios = T[cand, k] / col[cand]
            m = ratios.min()
            cand = cand[ratios <= m + 1e-12 * (1.0 + abs(m))]
            if cand.size == 1:
                break
        r = int(cand[0])
        pivot(r, enter)
        leaving = basis[r]
        basis[r] = enter
        if leaving == z0:
            x = np.zeros(n)
            for i, v in enumerate(basis):
                if n <= v < 2 * n:
                    x[v - n] = T[i, -1]
            return _polish_lcp(M, q, np.clip(x, 0.0, None))
    raise RayTerminationError("Lemke's method exceeded its pivot budget")


def _polish_lcp(M, q, x):
    """Recompute the basic variables of a Lemke solution from the original
    data, which removes the roundoff accumulated by the tableau pivots."""
    J = np.flatnonzero(x > 0)
    if J.size == 0:
        return x
    try:
        xJ = np.linalg.solve(M[np.ix_(J, J)], -q[J])
    except np.linalg.LinAlgError:
        return x
    y = np.zeros_like(x)
    y[J] = xJ
    tol = 1e-9 * (1.0 + np.abs(x).max())
    if np.all(xJ >= -tol) and np.all(M @ y + q >= -tol):
        return np.clip(y, 0.0, None)
    return x


def estimate_sigma(values) -> CovMatrix:
    """Unbiased sample covariance (divisor ``N - 1``) of the rows of ``values``."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] < 2:
        raise ValueError("need at least two draws to estimate a covariance")
    c = np.atleast_2d(np.cov(values, rowvar=False, ddof=1))
    return CovMatrix(c)


def jacobian_MN(A, z, S: BoxSet, tol=None) -> np.ndarray:
    """``A D + I - D`` with ``D`` selecting coordinates strictly inside ``S``.

    Raises
    ------
    DegenerateSolutionError
        If ``z`` is within ``tol`` of a face of ``S`` in some coordinate.
    """
    cell = cell_of_point(S, z, tol)
    flat = np.flatnonzero(cell.flat_mask)
    if flat.size:
        raise DegenerateSolutionError(flat)
    d = cell.projection_mask()
    M = np.asarray(A, dtype=float) * d[None, :]
    pinned = np.flatnonzero(~d)
    M[pinned, pinned] += 1.0
    return M


@dataclass(frozen=True)
class SaaSolution:
    """An SAA solution with the quantities inference needs.

    Attributes
    ----------
    z, x : ndarray
        ``z_N`` and ``x_N = Pi_S(z_N)``.
    M : ndarray
        Jacobian ``M_N`` of the SAA normal map at ``z_N``.
    sigma : CovMatrix
        ``Sigma_N``, sample covariance of ``F(x_N, xi^i)``.
    N : int
    set : BoxSet
    cell : Cell
        The full-dimensional cell ``P_N`` containing ``z_N``.
    """

    z: np.ndarray
    x: np.ndarray
    M: np.ndarray
    sigma: CovMatrix
    N: int
    set: BoxSet
    cell: Cell = field(repr=False)

    @property
    def n(self) -> int:
        return self.z.size

    @classmethod
    def from_parts(cls, z, M, sigma, N, S: BoxSet) -> "SaaSolution":
        """Wrap externally computed ``(z_N, M_N, Sigma_N)``."""
        z = np.asarray(z, dtype=float)
        sigma = sigma if isinstance(sigma, CovMatrix) else CovMatrix(sigma)
        return cls(z, S.project(z), np.asarray(M, dtype=float), sigma, int(N), S, cell_of_point(S, z))


def solve_saa(problem: SviProblem, N: int, rng: np.random.Generator, sigma=None) -> SaaSolution:
    """Sample, solve and package an SAA problem.

    ``sigma`` overrides the sample covariance (for replaying published data).
    """
    saa = assemble_saa(problem, N, rng)
    return solve_from_data(saa, problem.set, bandwidth=problem.bandwidth, sigma=sigma)


def solve_from_data(saa: SaaData, S: BoxSet, *, N=None, bandwidth=None, sigma=None) -> SaaSolution:
    z, x = solve_normal_map(saa.A_bar, saa.b_bar, S, bandwidth=bandwidth)
    M = jacobian_MN(saa.A_bar, z, S)
    if sigma is None:
        if saa.draws is None:
            raise ValueError("either draws or an explicit covariance is needed")
        sigma = estimate_sigma(saa.draws.values_at(x))
    elif not isinstance(sigma, CovMatrix):
        sigma = CovMatrix(sigma)
    N = saa.N if N is None else N
    if N is None:
        raise ValueError("sample size unknown")
    return SaaSolution(z, x, M, sigma, int(N), S, cell_of_point(S, z))

