"""Exception types raised across the package."""


class PwnciError(Exception):
    """Base class for all package errors."""


class NotPositiveDefiniteError(PwnciError, ValueError):
    """A covariance matrix failed the positive-definiteness test."""


class SingularBasisError(PwnciError, ValueError):
    """A basis matrix is rank deficient or a completed basis is singular."""


class AmbiguousPieceError(PwnciError):
    """A point sits on the boundary between pieces of a conical subdivision."""


class HomeomorphismError(PwnciError):
    """A piece matrix is singular, so the map cannot be a PL homeomorphism."""


class ConvergenceError(PwnciError):
    """The normal-map solver failed to find a consistent active pattern."""


class RayTerminationError(PwnciError):
    """Lemke's method ended on a secondary ray."""


class DegenerateSolutionError(PwnciError):
    """An SAA solution lies on a cell boundary, so its Jacobian is undefined.

    Attributes
    ----------
    coordinates : tuple of int
        Coordinates (0-based) that sit on a face of the box.
    """

    def __init__(self, coordinates, message=None):
        self.coordinates = tuple(int(c) for c in coordinates)
        if message is None:
            message = f"solution on a cell boundary at coordinates {self.coordinates}"
        super().__init__(message)
