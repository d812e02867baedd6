"""Confidence regions, cell selection and per-coordinate intervals for the
true solution of an SVI, computed from a single SAA solution.

Pipeline: ``confidence_region`` -> ``select_cell`` -> ``ci_z0`` / ``ci_x0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import lsq_linear

from .gauss import (
    CovMatrix,
    build_projector,
    chi2_quantile,
    delta_general,
    delta_half_width,
)
from .intervals import IntervalReport, Target
from .polyhedral import BoxSet, Cell, Sign, cell_ranges, face_projection_data
from .svi import SaaSolution

JOINT_TEST_RTOL = 1e-9


@dataclass(frozen=True)
class ConfidenceRegion:
    """Ellipsoid ``{z : (z - center)' shape (z - center) <= threshold}``."""

    center: np.ndarray
    shape: np.ndarray
    threshold: float

    def quad(self, z) -> np.ndarray:
        d = np.asarray(z, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.shape, d)

    def contains(self, z) -> bool:
        return bool(self.quad(z) <= self.threshold)

    @property
    def extent(self) -> np.ndarray:
        """Half-lengths of the smallest axis-aligned box containing the ellipsoid."""
        return np.sqrt(self.threshold * np.diag(np.linalg.inv(self.shape)))


def _chol_solve_M(sol: SaaSolution) -> np.ndarray:
    """``L^{-1} M_N`` with ``L`` the Cholesky factor of ``Sigma_N``."""
    return sla.solve_triangular(sol.sigma.chol, sol.M, lower=True)


def confidence_region(sol: SaaSolution, alpha1: float) -> ConfidenceRegion:
    """Asymptotic ``1 - alpha1`` region for ``z0``: shape ``M_N' Sigma_N^{-1} M_N``,
    threshold ``chi2_n(alpha1) / N``."""
    x = _chol_solve_M(sol)
    shape = x.T @ x
    shape = 0.5 * (shape + shape.T)
    return ConfidenceRegion(sol.z.copy(), shape, chi2_quantile(sol.n, alpha1) / sol.N)


def lambda_hat(sol: SaaSolution) -> CovMatrix:
    """``Lambda_N = M_N^{-1} Sigma_N M_N^{-T}``."""
    y = np.linalg.solve(sol.M, sol.sigma.chol)
    return CovMatrix(y @ y.T)


def _face_values(S: BoxSet, P_N: Cell, z):
    """For each coordinate, the nearest face of ``P_N`` and the state that
    pins to it (``nan``/``None`` when the coordinate cannot be pinned)."""
    face = np.full(S.dim, np.nan)
    state = [None] * S.dim
    for j, s in enumerate(P_N.pattern):
        l, u = S.lower[j], S.upper[j]
        if s in (Sign.MINUS, Sign.ZERO):
            face[j], state[j] = l, Sign.ZERO
        elif s in (Sign.ABOVE, Sign.UPPER):
            face[j], state[j] = u, Sign.UPPER
        elif s == Sign.PLUS:
            dl, du = abs(z[j] - l), abs(z[j] - u)
            if np.isfinite(l) and (dl <= du or not np.isfinite(u)):
                face[j], state[j] = l, Sign.ZERO
            elif np.isfinite(u):
                face[j], state[j] = u, Sign.UPPER
    return face, state


def _min_over_face(R, z_N, lo, hi, pinned, face):
    """``min ||R (z - z_N)||^2`` with ``z_j = face_j`` on ``pinned`` and
    ``lo <= z <= hi`` elsewhere."""
    free = ~pinned
    base = np.where(pinned, face, 0.0) - z_N
    if not free.any():
        r = R @ base
        return float(r @ r)
    target = -(R[:, pinned] @ base[pinned])
    lo_f = lo[free] - z_N[free]
    hi_f = hi[free] - z_N[free]
    if np.all(np.isinf(lo_f)) and np.all(np.isinf(hi_f)):
        u = np.linalg.lstsq(R[:, free], target, rcond=None)[0]
    else:
        u = lsq_linear(R[:, free], target, bounds=(lo_f, hi_f), method="bvls", tol=1e-12).x
    r = R[:, free] @ u - target
    return float(r @ r)


def select_cell(Q: ConfidenceRegion, P_N: Cell, S: BoxSet) -> Cell:
    """Smallest-dimensional face of ``P_N`` that meets the region ``Q``.

    Coordinates are screened one at a time (the nearest bound of ``P_N``
    must lie within the ellipsoid's axis extent), then the candidate set is
    tested jointly by minimizing the quadratic form over the face.  While
    the joint test fails, the candidate with the largest standardized
    distance to its bound is released.
    """
    z = Q.center
    face, state = _face_values(S, P_N, z)
    lam_diag = np.diag(np.linalg.inv(Q.shape))
    ext = np.sqrt(Q.threshold * lam_diag)
    dist = np.abs(z - face)
    cand = np.isfinite(face) & (dist <= ext)
    R = np.linalg.cholesky(Q.shape).T
    lo, hi = cell_ranges(S, P_N)
    limit = Q.threshold * (1.0 + JOINT_TEST_RTOL)
    stdist = np.where(cand, dist / np.sqrt(lam_diag), -np.inf)
    while cand.any():
        if _min_over_face(R, z, lo, hi, cand, face) <= limit:
            break
        j = int(np.argmax(stdist))
        cand[j] = False
        stdist[j] = -np.inf
    pattern = [state[j] if cand[j] else P_N.pattern[j] for j in range(S.dim)]
    return Cell(tuple(pattern), np.where(cand, face, z))


def anchor_in(C: Cell, S: BoxSet, z) -> np.ndarray:
    """``z`` with coordinates pinned in ``C`` snapped to their bound."""
    snapped = np.where([s == Sign.UPPER for s in C.pattern], S.upper, S.lower)
    return np.where(C.flat_mask, snapped, np.asarray(z, dtype=float))


def _z_parts(sol: SaaSolution, C: Cell, a0=None):
    lam = lambda_hat(sol)
    E = C.parallel_space()
    proj = build_projector(E, lam)
    a0 = anchor_in(C, sol.set, sol.z) if a0 is None else np.asarray(a0, dtype=float)
    center = proj @ (sol.z - a0) + a0
    return lam, proj, a0, center


def ci_z0(sol: SaaSolution, C: Cell, alpha2: float, alpha1: float = 0.0, a0=None) -> IntervalReport:
    """Intervals for ``z0`` given the selected cell ``C``.

    Parameters
    ----------
    sol : SaaSolution
    C : Cell
        Cell from :func:`select_cell`.
    alpha2 : float
        Level spent on the intervals themselves.
    alpha1 : float
        Level spent on the confidence region (recorded in the report).
    a0 : array_like, optional
        Point of ``C``; defaults to ``z_N`` snapped onto ``C``.  The result
        does not depend on this choice.
    """
    _, proj, a0, center = _z_parts(sol, C, a0)
    half = delta_half_width(proj, alpha2) / np.sqrt(sol.N)
    return IntervalReport(Target.Z0, center, half, C, (alpha1, alpha2), a0)


def ci_x0(
    sol: SaaSolution, C: Cell, S: BoxSet | None, alpha2: float, alpha1: float = 0.0, a0=None
) -> IntervalReport:
    """Intervals for ``x0``: project the ``z0`` estimate onto ``aff(C ∩ S)``
    and propagate through ``Pi_H o Pi_E`` with ``H = Par(C ∩ S)``."""
    S = sol.set if S is None else S
    lam, proj, a0, z_center = _z_parts(sol, C, a0)
    fp = face_projection_data(S, C)
    center = fp.project(z_center)
    composite = fp.keep[:, None] * proj.matrix
    half = delta_general(lam.matrix, composite, alpha2) / np.sqrt(sol.N)
    return IntervalReport(Target.X0, center, half, C, (alpha1, alpha2), a0)


@dataclass(frozen=True)
class PipelineResult:
    region: ConfidenceRegion
    cell: Cell
    z: IntervalReport
    x: IntervalReport


def infer(sol: SaaSolution, alpha1: float, alpha2: float) -> PipelineResult:
    """Region, selected cell and intervals for ``z0`` and ``x0``."""
    Q = confidence_region(sol, alpha1)
    C = select_cell(Q, sol.cell, sol.set)
    return PipelineResult(
        Q,
        C,
        ci_z0(sol, C, alpha2, alpha1),
        ci_x0(sol, C, sol.set, alpha2, alpha1),
    )
