"""Gaussian linear algebra: covariance-dependent oblique projectors and
per-coordinate interval half-widths.

For a covariance ``Sigma`` and a subspace ``E`` the projector built here maps
``Y ~ N(0, Sigma)`` onto ``E`` along the unique complement ``V`` that makes
``P Y`` and ``(I - P) Y`` independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import NotPositiveDefiniteError, SingularBasisError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric positive-definite covariance matrix.

    Construction symmetrizes (after checking asymmetry is below ``1e-12``
    relative) and rejects matrices whose smallest Cholesky pivot is at most
    ``n * eps * max(diag)``.
    """

    matrix: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"covariance must be a non-empty square matrix, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NotPositiveDefiniteError("covariance has non-finite entries")
        scale = max(np.abs(a).max(), np.finfo(float).tiny)
        if np.abs(a - a.T).max() > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        a = 0.5 * (a + a.T)
        n = a.shape[0]
        dmax = np.max(np.diag(a))
        try:
            L = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("covariance is not positive definite") from exc
        pivots = np.diag(L) ** 2
        if dmax <= 0 or pivots.min() <= n * _EPS * dmax:
            raise NotPositiveDefiniteError(
                f"smallest Cholesky pivot {pivots.min():.3e} below tolerance"
            )
        a.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "chol", L)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_cov(sigma) -> CovMatrix:
    return sigma if isinstance(sigma, CovMatrix) else CovMatrix(sigma)


@dataclass(frozen=True)
class SubspaceBasis:
    """Full column rank ``n x k`` basis of a subspace of ``R^n``.

    ``k = 0`` is the trivial subspace ``{0}``.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float, copy=True)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D array (n x k)")
        n, k = b.shape
        if k > n:
            raise SingularBasisError(f"{k} vectors cannot be independent in R^{n}")
        if k:
            _, r, _ = sla.qr(b, mode="economic", pivoting=True)
            d = np.abs(np.diag(r))
            if d.min() <= max(n, k) * _EPS * d.max():
                raise SingularBasisError("basis columns are linearly dependent")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim_ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def coordinates(cls, n: int, index) -> "SubspaceBasis":
        """Span of the standard basis vectors ``e_j`` for ``j`` in ``index``
        (a boolean mask or integer indices)."""
        idx = np.asarray(index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return cls(np.eye(n)[:, idx.astype(int)])

    @classmethod
    def trivial(cls, n: int) -> "SubspaceBasis":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "SubspaceBasis":
        return cls(np.eye(n))

    def coordinate_support(self) -> np.ndarray:
        """Mask of coordinates ``j`` for which some element has a nonzero
        ``j``-th component."""
        if self.dim == 0:
            return np.zeros(self.dim_ambient, dtype=bool)
        return np.abs(self.basis).max(axis=1) > 0


def complete_basis(w1: np.ndarray) -> np.ndarray:
    """Complement basis for the column span of ``w1``.

    Standard basis vectors are appended greedily, each time taking the one
    with the largest residual after projection onto the current span.
    """
    n, k = w1.shape
    if k == n:
        return np.zeros((n, 0))
    unit = (np.count_nonzero(w1, axis=0) == 1) & (np.abs(w1).max(axis=0, initial=0.0) == 1.0)
    if np.all(unit):
        # coordinate subspace: the remaining unit vectors are the greedy choice
        used = np.zeros(n, dtype=bool)
        used[np.argmax(np.abs(w1), axis=0)] = True
        return np.eye(n)[:, ~used]
    q = np.linalg.qr(w1, mode="reduced")[0] if k else np.zeros((n, 0))
    chosen = []
    for _ in range(n - k):
        resid = 1.0 - np.sum(q * q, axis=1)
        resid[chosen] = -np.inf
        j = int(np.argmax(resid))
        chosen.append(j)
        v = np.zeros(n)
        v[j] = 1.0
        v -= q @ (q.T @ v)
        v -= q @ (q.T @ v)
        q = np.column_stack([q, v / np.linalg.norm(v)])
    return np.eye(n)[:, sorted(chosen)]


@dataclass(frozen=True)
class ObliqueProjector:
    """Projector onto ``subspace`` along the covariance-adapted complement.

    Attributes
    ----------
    matrix : ndarray, shape (n, n)
    subspace : SubspaceBasis
        The target subspace ``E`` with basis ``W1``.
    cond_cov : ndarray, shape (k, k)
        Schur complement ``S11 - S12 S22^{-1} S21`` of the covariance in
        ``W`` coordinates; ``W1 @ cond_cov @ W1.T`` is ``Cov(P Y)``.
    """

    matrix: np.ndarray
    subspace: SubspaceBasis
    cond_cov: np.ndarray

    @property
    def cov(self) -> np.ndarray:
        w1 = self.subspace.basis
        return w1 @ self.cond_cov @ w1.T

    @property
    def variances(self) -> np.ndarray:
        """Per-coordinate variances of ``P Y``."""
        w1 = self.subspace.basis
        return np.einsum("ij,jk,ik->i", w1, self.cond_cov, w1)

    def __matmul__(self, other):
        return self.matrix @ other


def _blocks(w1, w2, sigma):
    w = np.hstack([w1, w2])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(w, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularBasisError("[W1 W2] is singular") from exc
    d = np.abs(np.diag(lu[0]))
    if d.min() <= w.shape[0] * _EPS * d.max():
        raise SingularBasisError("[W1 W2] is singular")
    winv = sla.lu_solve(lu, np.eye(w.shape[0]))
    st = winv @ sigma @ winv.T
    st = 0.5 * (st + st.T)
    return winv, st


def _assemble(w1, winv, coupling):
    k = w1.shape[1]
    left = np.hstack([np.eye(k), -coupling])
    return w1 @ left @ winv


def build_projector(E: SubspaceBasis, sigma, W2=None) -> ObliqueProjector:
    """Oblique projector onto ``E`` that decorrelates ``P Y`` from ``Y - P Y``.

    Parameters
    ----------
    E : SubspaceBasis
    sigma : CovMatrix or array_like
    W2 : array_like, optional
        Basis of any complement of ``E``. The result does not depend on it;
        when omitted, :func:`complete_basis` supplies one.
    """
    sigma = as_cov(sigma)
    n, k = E.dim_ambient, E.dim
    if sigma.dim != n:
        raise ValueError(f"covariance is {sigma.dim}-dimensional, subspace lives in R^{n}")
    w1 = E.basis
    if k == 0:
        return ObliqueProjector(np.zeros((n, n)), E, np.zeros((0, 0)))
    if W2 is None:
        w2 = complete_basis(w1)
    else:
        w2 = np.asarray(W2, dtype=float).reshape(n, -1)
        if w2.shape[1] != n - k:
            raise SingularBasisError(f"complement needs {n - k} columns, got {w2.shape[1]}")
    winv, st = _blocks(w1, w2, sigma.matrix)
    if k == n:
        return ObliqueProjector(np.eye(n), E, st)
    s11, s12, s22 = st[:k, :k], st[:k, k:], st[k:, k:]
    coupling = sla.solve(s22, s12.T, assume_a="pos").T
    cond = s11 - coupling @ s12.T
    cond = 0.5 * (cond + cond.T)
    return ObliqueProjector(_assemble(w1, winv, coupling), E, cond)


def projector_with_coupling(E: SubspaceBasis, W2, coupling) -> np.ndarray:
    """Projector onto ``E`` along ``span(W1 @ coupling + W2)``.

    Any complement of ``E`` can be written this way; only the coupling
    returned inside :func:`build_projector` gives independence.
    """
    w1 = E.basis
    w2 = np.asarray(W2, dtype=float)
    winv, _ = _blocks(w1, w2, np.eye(w1.shape[0]))
    return _assemble(w1, winv, np.asarray(coupling, dtype=float))


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def chi2_quantile(dof: int, alpha: float) -> float:
    """Upper critical value ``x`` with ``P(U > x) = alpha`` for ``U ~ chi2(dof)``."""
    if int(dof) != dof or dof < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {dof}")
    _check_alpha(alpha)
    return float(stats.chi2.isf(alpha, int(dof)))


def delta_half_width(proj: ObliqueProjector, alpha: float, j=None):
    """Half-width ``sqrt(chi2_1(alpha) * Var((P Y)_j))``.

    Exactly zero for coordinates where every element of ``E`` has a zero
    ``j``-th component. Returns an array over all coordinates when ``j`` is
    None (coordinates are 0-based).
    """
    _check_alpha(alpha)
    var = np.clip(proj.variances, 0.0, None)
    var[~proj.subspace.coordinate_support()] = 0.0
    out = np.sqrt(chi2_quantile(1, alpha) * var)
    return out if j is None else float(out[j])


def delta_general(Q, f_row, alpha: float):
    """Half-width ``sqrt(chi2_1(alpha) * f Q f^T)`` for a row (or rows) ``f``."""
    _check_alpha(alpha)
    q = np.asarray(Q, dtype=float)
    f = np.asarray(f_row, dtype=float)
    var = np.einsum("...i,ij,...j->...", f, q, f)
    out = np.sqrt(chi2_quantile(1, alpha) * np.clip(var, 0.0, None))
    return float(out) if out.ndim == 0 else out


def mvn_sample(sigma, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from ``N(0, sigma)`` as ``L @ g`` with ``L`` the lower Cholesky factor.

    Returns shape ``(n,)`` if ``size`` is None, else ``(size, n)``.
    """
    sigma = as_cov(sigma)
    if size is None:
        return sigma.chol @ rng.standard_normal(sigma.dim)
    g = rng.standard_normal((size, sigma.dim))
    return g @ sigma.chol.T
