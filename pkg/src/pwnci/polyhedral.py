"""Normal-manifold geometry of boxes and orthants.

A box ``S = [l, u]`` is a product of intervals, so every cell of its normal
manifold is a product of one-dimensional pieces and can be encoded as a
per-coordinate :class:`Sign` pattern.  For the orthant ``R^n_+``:

* ``PLUS``  -- ``z_j >= 0``, projected identically (``x_j = z_j``)
* ``MINUS`` -- ``z_j <= 0``, projected onto the bound (``x_j = 0``)
* ``ZERO``  -- ``z_j = 0``

Upper bounds add ``UPPER`` (``z_j = u_j``) and ``ABOVE`` (``z_j >= u_j``);
a coordinate with ``l_j = u_j`` is ``FIXED``: the whole line is one cell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import AmbiguousPieceError, HomeomorphismError
from .gauss import SubspaceBasis

MAX_ENUMERATED_SPLITS = 20


class Sign(IntEnum):
    MINUS = -1
    ZERO = 0
    PLUS = 1
    UPPER = 2
    ABOVE = 3
    FIXED = 4

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    Sign.MINUS: "-",
    Sign.ZERO: "0",
    Sign.PLUS: "+",
    Sign.UPPER: "u",
    Sign.ABOVE: "^",
    Sign.FIXED: "=",
}
_FLAT = (Sign.ZERO, Sign.UPPER)


def default_tolerance(z) -> float:
    return 1e-12 * (1.0 + float(np.max(np.abs(z), initial=0.0)))


@dataclass(frozen=True)
class BoxSet:
    """Box ``{x : lower <= x <= upper}``, bounds possibly infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float, copy=True).ravel()
        hi = np.array(self.upper, dtype=float, copy=True).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("bounds must satisfy lower <= upper")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("box is empty")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def orthant(cls, n: int) -> "BoxSet":
        return cls(np.zeros(n), np.full(n, np.inf))

    @classmethod
    def free(cls, n: int) -> "BoxSet":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def dim(self) -> int:
        return self.lower.size

    def project(self, z) -> np.ndarray:
        return np.clip(z, self.lower, self.upper)

    def contains(self, x, tol=0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def is_cone(self) -> bool:
        ok = lambda b: np.all((b == 0) | np.isinf(b))
        return bool(ok(self.lower) and ok(self.upper))

    def __eq__(self, other):
        return (
            isinstance(other, BoxSet)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class Cell:
    """A cell of the normal manifold of a box, with a point ``anchor`` in it."""

    pattern: tuple
    anchor: np.ndarray = field(compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(Sign(s) for s in self.pattern))
        if self.anchor is not None:
            a = np.array(self.anchor, dtype=float, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, "anchor", a)

    @property
    def n(self) -> int:
        return len(self.pattern)

    @property
    def dim(self) -> int:
        return sum(s not in _FLAT for s in self.pattern)

    @property
    def flat_mask(self) -> np.ndarray:
        """Coordinates pinned to a face value inside this cell."""
        return np.array([s in _FLAT for s in self.pattern], dtype=bool)

    def parallel_space(self) -> SubspaceBasis:
        """``Par C``: span of ``e_j`` over non-pinned coordinates."""
        return SubspaceBasis.coordinates(self.n, ~self.flat_mask)

    def projection_mask(self) -> np.ndarray:
        """Coordinates that the box projection maps identically on this cell."""
        return np.array([s == Sign.PLUS for s in self.pattern], dtype=bool)

    def contains(self, S: BoxSet, z, tol=None) -> bool:
        z = np.asarray(z, dtype=float)
        tol = default_tolerance(z) if tol is None else tol
        lo, hi = _cell_ranges(S, self.pattern)
        return bool(np.all(z >= lo - tol) and np.all(z <= hi + tol))

    @property
    def label(self) -> str:
        return "".join(s.symbol for s in self.pattern)

    def __str__(self):
        return f"Cell({self.label})"


def _cell_ranges(S: BoxSet, pattern):
    lo = np.empty(S.dim)
    hi = np.empty(S.dim)
    for j, s in enumerate(pattern):
        l, u = S.lower[j], S.upper[j]
        lo[j], hi[j] = {
            Sign.MINUS: (-np.inf, l),
            Sign.ZERO: (l, l),
            Sign.PLUS: (l, u),
            Sign.UPPER: (u, u),
            Sign.ABOVE: (u, np.inf),
            Sign.FIXED: (-np.inf, np.inf),
        }[s]
    return lo, hi


def cell_ranges(S: BoxSet, cell: Cell):
    """Per-coordinate closed ranges ``(lo, hi)`` describing ``cell``."""
    return _cell_ranges(S, cell.pattern)


def cell_of_point(S: BoxSet, z, tol=None) -> Cell:
    """The cell whose relative interior contains ``z``.

    Coordinates within ``tol`` of a finite bound are classified as lying on
    that face, so ties resolve to the lower-dimensional cell.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (S.dim,):
        raise ValueError(f"point has shape {z.shape}, box is {S.dim}-dimensional")
    tol = default_tolerance(z) if tol is None else tol
    pattern = []
    for zj, l, u in zip(z, S.lower, S.upper):
        if l == u:
            pattern.append(Sign.FIXED)
        elif np.isfinite(l) and abs(zj - l) <= tol:
            pattern.append(Sign.ZERO)
        elif np.isfinite(u) and abs(zj - u) <= tol:
            pattern.append(Sign.UPPER)
        elif zj < l:
            pattern.append(Sign.MINUS)
        elif zj > u:
            pattern.append(Sign.ABOVE)
        else:
            pattern.append(Sign.PLUS)
    return Cell(tuple(pattern), z)


def n_cells_containing(S: BoxSet, C: Cell, limit: int = MAX_ENUMERATED_SPLITS) -> list:
    """All full-dimensional cells having ``C`` as a face."""
    choices = []
    for s in C.pattern:
        if s == Sign.ZERO:
            choices.append((Sign.PLUS, Sign.MINUS))
        elif s == Sign.UPPER:
            choices.append((Sign.PLUS, Sign.ABOVE))
        else:
            choices.append((s,))
    splits = sum(len(c) > 1 for c in choices)
    if splits > limit:
        raise ValueError(f"{2 ** splits} neighbouring cells exceeds the enumeration limit")
    return [Cell(p, C.anchor) for p in itertools.product(*choices)]


def critical_cone(S: BoxSet, x0, z0, tol=None) -> BoxSet:
    """``K0 = T_S(x0) intersected with {z0 - x0}^perp`` as a box-shaped cone.

    Per coordinate: ``R`` if ``x0_j`` is strictly inside, ``R_+`` (``R_-``)
    at a lower (upper) bound with zero normal component, ``{0}`` at a bound
    with a nonzero normal component.
    """
    x0 = np.asarray(x0, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    tol = default_tolerance(z0) * 1e3 if tol is None else tol
    if np.max(np.abs(S.project(z0) - x0), initial=0.0) > tol:
        raise ValueError("x0 is not the projection of z0 onto S")
    w = z0 - x0
    lo = np.full(S.dim, -np.inf)
    hi = np.full(S.dim, np.inf)
    for j in range(S.dim):
        l, u = S.lower[j], S.upper[j]
        at_l = np.isfinite(l) and abs(x0[j] - l) <= tol
        at_u = np.isfinite(u) and abs(x0[j] - u) <= tol
        if at_l and at_u:
            lo[j] = hi[j] = 0.0
        elif at_l:
            lo[j] = 0.0
            if w[j] < -tol:
                hi[j] = 0.0
        elif at_u:
            hi[j] = 0.0
            if w[j] > tol:
                lo[j] = 0.0
    return BoxSet(lo, hi)


tangent_cone_K0 = critical_cone


@dataclass(frozen=True)
class Piece:
    """Linear piece on the cone ``{v : signs_j * v_j >= 0}``.

    ``signs`` has entries in ``{-1, 0, +1}``; 0 leaves ``v_j`` unconstrained.
    """

    signs: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        s = np.array(self.signs, dtype=np.int8, copy=True).ravel()
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.shape != (s.size, s.size):
            raise ValueError("piece matrix and sign vector sizes disagree")
        if not np.all(np.isin(s, (-1, 0, 1))):
            raise ValueError("signs must be -1, 0 or +1")
        s.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "signs", s)
        object.__setattr__(self, "matrix", m)

    @property
    def key(self) -> bytes:
        return self.signs.tobytes()

    def contains(self, v, tol=0.0) -> bool:
        return bool(np.all(self.signs * np.asarray(v) >= -tol))

    def margin(self, v) -> float:
        """Smallest slack over constrained coordinates (``inf`` if none)."""
        c = self.signs != 0
        if not c.any():
            return np.inf
        return float(np.min(self.signs[c] * np.asarray(v)[c]))


def _check_nonsingular(m):
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= m.shape[0] * np.finfo(float).eps * max(s[0], 1.0):
        raise HomeomorphismError("piece matrix is singular")


class PiecewiseLinearMap:
    """Piecewise linear map on a conical subdivision of ``R^n`` by
    sign-constrained cones (products of ``R``, ``R_+`` and ``R_-``)."""

    def __init__(self, pieces):
        pieces = list(pieces)
        if not pieces:
            raise ValueError("at least one piece is required")
        n = pieces[0].signs.size
        if any(p.signs.size != n for p in pieces):
            raise ValueError("pieces live in different dimensions")
        for p in pieces:
            _check_nonsingular(p.matrix)
        self._pieces = pieces
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    @property
    def pieces(self) -> list:
        return self._pieces

    @property
    def n_pieces(self) -> int:
        return len(self._pieces)

    @property
    def lineality(self) -> SubspaceBasis:
        free = np.all(np.array([p.signs for p in self._pieces]) == 0, axis=0)
        return SubspaceBasis.coordinates(self._n, free)

    def piece_at(self, v, tol=None) -> Piece:
        """Piece whose cone contains ``v`` in its interior.

        Raises :class:`AmbiguousPieceError` when ``v`` lies within ``tol`` of a
        boundary between cones.
        """
        v = np.asarray(v, dtype=float)
        tol = default_tolerance(v) if tol is None else tol
        hits = [p for p in self._pieces if p.contains(v, tol)]
        if len(hits) != 1 or hits[0].margin(v) <= tol:
            raise AmbiguousPieceError(f"point lies on a piece boundary ({len(hits)} candidate cones)")
        return hits[0]

    def index_of(self, v, tol=None) -> int:
        p = self.piece_at(v, tol)
        return next(i for i, q in enumerate(self._pieces) if q is p)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        hits = [p for p in self._pieces if p.contains(v, default_tolerance(v))]
        if not hits:
            raise AmbiguousPieceError("no piece contains the point; subdivision does not cover R^n")
        return hits[0].matrix @ v

    def inverse(self, y) -> np.ndarray:
        """``Gamma^{-1}(y)``: the ``M_i^{-1} y`` that falls inside ``K_i``."""
        y = np.asarray(y, dtype=float)
        best, best_margin = None, -np.inf
        for p in self._pieces:
            v = np.linalg.solve(p.matrix, y)
            m = p.margin(v)
            if m > best_margin:
                best, best_margin = v, m
        if best_margin < -1e3 * default_tolerance(best):
            raise AmbiguousPieceError("no piece inverts the point; subdivision is inconsistent")
        return best

    def validate(self, rng: np.random.Generator, n_probes: int = 1000) -> None:
        """Probe that cones cover ``R^n`` with disjoint interiors."""
        for v in rng.standard_normal((n_probes, self._n)):
            inside = [p for p in self._pieces if p.contains(v)]
            if not inside:
                raise ValueError("cones do not cover R^n")
            if sum(p.margin(v) > 0 for p in inside) > 1:
                raise ValueError("cone interiors overlap")


class NormalMapPL(PiecewiseLinearMap):
    """``v -> L Pi_K(v) + v - Pi_K(v)`` for a box-shaped cone ``K``.

    Pieces are enumerated only when ``K`` has at most
    ``MAX_ENUMERATED_SPLITS`` half-line coordinates; otherwise the piece
    containing a given vector is built on demand.
    """

    def __init__(self, L, cone: BoxSet):
        L = np.array(L, dtype=float)
        if L.shape != (cone.dim, cone.dim):
            raise ValueError("matrix and cone dimensions disagree")
        if not cone.is_cone():
            raise ValueError("normal-map pieces need a box-shaped cone")
        self.L = L
        self.cone = cone
        self._n = cone.dim
        lo, hi = cone.lower, cone.upper
        self._nonneg = (lo == 0) & (hi == np.inf)
        self._nonpos = (lo == -np.inf) & (hi == 0)
        self._free = (lo == -np.inf) & (hi == np.inf)
        self._split = self._nonneg | self._nonpos
        self._pieces = None
        self._cache = {}

    @property
    def n_splits(self) -> int:
        return int(self._split.sum())

    @property
    def n_pieces(self) -> int:
        return 2 ** self.n_splits

    @property
    def pieces(self) -> list:
        if self._pieces is None:
            if self.n_splits > MAX_ENUMERATED_SPLITS:
                raise ValueError(
                    f"{self.n_pieces} pieces; use piece_at() instead of enumerating"
                )
            idx = np.flatnonzero(self._split)
            self._pieces = [
                self._piece(self._signs_from(idx, combo))
                for combo in itertools.product((1, -1), repeat=idx.size)
            ]
        return self._pieces

    def _signs_from(self, idx, combo):
        s = np.zeros(self._n, dtype=np.int8)
        s[idx] = combo
        return s

    def _piece(self, signs) -> Piece:
        key = signs.tobytes()
        p = self._cache.get(key)
        if p is None:
            d = self._free | (self._nonneg & (signs > 0)) | (self._nonpos & (signs < 0))
            m = self.L * d[None, :]
            m[:, ~d] += np.eye(self._n)[:, ~d]
            _check_nonsingular(m)
            p = Piece(signs, m)
            self._cache[key] = p
        return p

    @property
    def lineality(self) -> SubspaceBasis:
        return SubspaceBasis.coordinates(self._n, ~self._split)

    def piece_at(self, v, tol=None) -> Piece:
        v = np.asarray(v, dtype=float)
        tol = default_tolerance(v) if tol is None else tol
        vs = v[self._split]
        if np.any(np.abs(vs) <= tol):
            raise AmbiguousPieceError("point lies on a piece boundary")
        signs = np.zeros(self._n, dtype=np.int8)
        signs[self._split] = np.where(vs > 0, 1, -1)
        return self._piece(signs)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        p = self.cone.project(v)
        return self.L @ p + v - p

    def inverse(self, y) -> np.ndarray:
        from .svi import solve_normal_map

        z, _ = solve_normal_map(self.L, -np.asarray(y, dtype=float), self.cone)
        return z


def normal_map_pieces(L, K0: BoxSet) -> NormalMapPL:
    """Pieces ``M_i = L Pi_i + I - Pi_i`` of the normal map of ``L`` over ``K0``.

    Raises :class:`HomeomorphismError` (lazily, per piece, when pieces are not
    enumerated) if a piece matrix is singular.
    """
    pl = NormalMapPL(L, K0)
    if pl.n_splits <= MAX_ENUMERATED_SPLITS:
        pl.pieces
    return pl


def lineality_space(P: PiecewiseLinearMap) -> SubspaceBasis:
    """Common lineality space (equivalently the intersection) of all cones."""
    return P.lineality


@dataclass(frozen=True)
class FaceProjection:
    """Data for projecting onto ``aff F`` with ``F = C ∩ S``.

    Attributes
    ----------
    face : BoxSet
        ``F`` itself (a face of ``S``; pinned coordinates have equal bounds).
    keep : ndarray of bool
        Coordinates mapped identically by the affine projector.
    offset : ndarray
        Values assigned to the other coordinates.
    H : SubspaceBasis
        ``Par F``.
    """

    face: BoxSet
    keep: np.ndarray
    offset: np.ndarray
    H: SubspaceBasis

    def project(self, z) -> np.ndarray:
        return np.where(self.keep, z, self.offset)

    @property
    def linear_part(self) -> np.ndarray:
        return np.diag(self.keep.astype(float))


def face_projection_data(S: BoxSet, C: Cell) -> FaceProjection:
    """``F = C ∩ S``, the affine projector onto ``aff F`` and ``H = Par F``."""
    lo = np.empty(S.dim)
    hi = np.empty(S.dim)
    for j, s in enumerate(C.pattern):
        l, u = S.lower[j], S.upper[j]
        if s == Sign.PLUS:
            lo[j], hi[j] = l, u
        elif s in (Sign.UPPER, Sign.ABOVE):
            lo[j] = hi[j] = u
        else:
            lo[j] = hi[j] = l
    keep = lo < hi
    offset = np.where(keep, 0.0, lo)
    return FaceProjection(BoxSet(lo, hi), keep, offset, SubspaceBasis.coordinates(S.dim, keep))
