"""Piecewise normal random vectors ``Z = z0 + Gamma^{-1}(Y)``, ``Y ~ N(0, Sigma)``.

Intervals for ``z0`` use the covariance ``Q_i = M_i^{-1} Sigma M_i^{-T}`` of
the piece that ``Z`` falls in, projected onto the common lineality space
``E`` of the pieces along the ``Q_i``-adapted complement.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import AmbiguousPieceError
from .gauss import (
    CovMatrix,
    as_cov,
    build_projector,
    delta_half_width,
    mvn_sample,
)
from .intervals import IntervalReport, Target
from .polyhedral import PiecewiseLinearMap, default_tolerance


class PiecewiseNormalModel:
    """Law of ``z0 + Gamma^{-1}(Y)`` with ``z0`` known to lie in ``a0 + E``.

    Parameters
    ----------
    gamma : PiecewiseLinearMap
    sigma : CovMatrix or array_like
    a0 : array_like
        A point of the affine set containing ``z0``; its direction space is
        the lineality space of ``gamma``.
    center : array_like, optional
        ``z0``. Needed only for sampling; interval construction never reads it.
    """

    def __init__(self, gamma: PiecewiseLinearMap, sigma, a0, center=None):
        self.gamma = gamma
        self.sigma = as_cov(sigma)
        if self.sigma.dim != gamma.n:
            raise ValueError("covariance and piecewise map dimensions disagree")
        self.a0 = np.asarray(a0, dtype=float).copy()
        self.center = None if center is None else np.asarray(center, dtype=float).copy()
        self.E = gamma.lineality
        if self.center is not None:
            off = (self.center - self.a0)[~self.E.coordinate_support()]
            if np.max(np.abs(off), initial=0.0) > 1e-9 * (1 + np.abs(self.center).max()):
                raise ValueError("center does not lie in a0 + E")
        self._q = {}
        self._proj = {}

    @property
    def n(self) -> int:
        return self.gamma.n

    def piece_cov(self, piece) -> CovMatrix:
        """``Q_i = M_i^{-1} Sigma M_i^{-T}``, cached per piece."""
        key = piece.key
        q = self._q.get(key)
        if q is None:
            x = np.linalg.solve(piece.matrix, self.sigma.chol)
            q = CovMatrix(x @ x.T)
            self._q[key] = q
        return q

    def _projector(self, piece):
        key = piece.key
        p = self._proj.get(key)
        if p is None:
            p = build_projector(self.E, self.piece_cov(piece))
            self._proj[key] = p
        return p

    def sample_z(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw ``Z`` (shape ``(n,)``, or ``(size, n)`` when ``size`` is given)."""
        if self.center is None:
            raise ValueError("sampling needs the model center z0")
        if size is None:
            return self.center + self.gamma.inverse(mvn_sample(self.sigma, rng))
        y = mvn_sample(self.sigma, rng, size)
        try:
            pieces = self.gamma.pieces
        except ValueError:
            return self.center + np.array([self.gamma.inverse(v) for v in y])
        out = np.full_like(y, np.nan)
        for p in pieces:
            v = sla.solve(p.matrix, y.T).T
            mask = np.all(p.signs * v >= 0, axis=1) & np.isnan(out[:, 0])
            out[mask] = v[mask]
        if np.isnan(out).any():
            raise AmbiguousPieceError("sample not covered by any piece; subdivision invalid")
        return self.center + out

    def lambda_at(self, z) -> tuple:
        """``(piece, Q_piece)`` for the piece ``K_i`` with ``z in Int(K_i + A)``."""
        v = np.asarray(z, dtype=float) - self.a0
        piece = self.gamma.piece_at(v, default_tolerance(z))
        return piece, self.piece_cov(piece)

    def _intervals(self, z, alpha, scale):
        z = np.asarray(z, dtype=float)
        piece, _ = self.lambda_at(z)
        proj = self._projector(piece)
        center = proj @ (z - self.a0) + self.a0
        half = delta_half_width(proj, alpha) * scale
        idx = next((i for i, p in enumerate(self._safe_pieces()) if p.key == piece.key), None)
        return IntervalReport(Target.Z0, center, half, None, (0.0, alpha), self.a0.copy(), idx)

    def _safe_pieces(self):
        try:
            return self.gamma.pieces
        except ValueError:
            return []

    def exact_ci(self, Z, alpha: float) -> IntervalReport:
        """Intervals with exact coverage ``1 - alpha`` for each coordinate of ``z0``
        that varies along ``E``; other coordinates get width 0 at ``a0``."""
        return self._intervals(Z, alpha, 1.0)

    def asymptotic_lambda(self, z_N) -> CovMatrix:
        return self.lambda_at(z_N)[1]

    def asymptotic_ci(self, z_N, alpha: float, N: int) -> IntervalReport:
        """Intervals for ``z0`` from ``z_N ~ z0 + Gamma^{-1}(Y)/sqrt(N)``."""
        return self._intervals(z_N, alpha, 1.0 / np.sqrt(N))


def exact_ci(model: PiecewiseNormalModel, Z, alpha: float) -> IntervalReport:
    return model.exact_ci(Z, alpha)


def asymptotic_lambda(model: PiecewiseNormalModel, z_N) -> CovMatrix:
    return model.asymptotic_lambda(z_N)


def sample_z(model: PiecewiseNormalModel, rng: np.random.Generator, size=None) -> np.ndarray:
    return model.sample_z(rng, size)

