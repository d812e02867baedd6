"""Per-coordinate interval reports shared by the exact and SAA pipelines."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .polyhedral import Cell

DEGENERATE_HIT_TOL = 1e-9


class Target(str, Enum):
    Z0 = "z0"
    X0 = "x0"


@dataclass(frozen=True)
class IntervalReport:
    """Intervals ``center_j +/- half_widths_j`` for each coordinate.

    Attributes
    ----------
    target : Target
        Whether the intervals bound ``z0`` or ``x0``.
    center, half_widths : ndarray
    cell : Cell or None
        The cell the intervals were computed for (``None`` for the exact
        piecewise-normal pipeline, where the piece index is stored instead).
    alphas : tuple of float
        ``(alpha1, alpha2)``; ``alpha1`` is 0 when no confidence region was used.
    a0 : ndarray
        Anchor point of the affine set.
    piece : int or None
    """

    target: Target
    center: np.ndarray
    half_widths: np.ndarray
    cell: Cell | None
    alphas: tuple
    a0: np.ndarray
    piece: int | None = None

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_widths

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_widths

    @property
    def level(self) -> float:
        return 1.0 - sum(self.alphas)

    @property
    def degenerate(self) -> np.ndarray:
        return self.half_widths == 0.0

    def covers(self, truth, tol: float = DEGENERATE_HIT_TOL) -> np.ndarray:
        """Per-coordinate hits; width-0 intervals hit only on a match within ``tol``."""
        gap = np.abs(self.center - np.asarray(truth, dtype=float))
        return np.where(self.degenerate, gap <= tol, gap <= self.half_widths)

    def format(self, digits: int = 4) -> str:
        lines = []
        for j, (c, h) in enumerate(zip(self.center, self.half_widths), start=1):
            name = f"({self.target.value}){j}"
            if h == 0.0:
                lines.append(f"{name}: {{{c:.{digits}f}}}")
            else:
                lines.append(f"{name}: [{c - h:.{digits}f}, {c + h:.{digits}f}]")
        return "\n".join(lines)
