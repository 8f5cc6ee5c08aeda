"""Exception hierarchy shared across the package."""


class HipmetricsError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInput(HipmetricsError):
    """Fitting input has no unique solution (coincident or collinear points)."""


class BadNormal(HipmetricsError):
    """Supplied normal is not orthogonal to the line direction."""


class EmptyMask(HipmetricsError):
    """Operation requires at least one set pixel."""


class TooFewVertices(HipmetricsError):
    """Contour is too short for the requested window."""


class LandmarkFailure(HipmetricsError):
    """Ultrasound landmark derivation failed; reported downstream as status 0."""


class DegenerateTriangle(HipmetricsError):
    """No triangle with usable area exists in the contour."""


class AmbiguousCorners(HipmetricsError):
    """Triangle corner classification has no unambiguous winner."""


class DegenerateVariance(HipmetricsError):
    """Rating table has zero variance in a form the ICC cannot absorb."""


class DomainError(HipmetricsError):
    """Numerical argument outside the supported domain."""


class ShapeMismatch(HipmetricsError):
    """Matrix shape incompatible with the requested metric."""


class UnknownLabel(HipmetricsError):
    """Label not present in the declared class list."""


class SpecOutOfBounds(HipmetricsError):
    """Phantom specification cannot be realized inside the image bounds."""


class InfeasibleSpec(HipmetricsError):
    """Phantom specification is internally inconsistent (no realizing geometry)."""


class ParseError(HipmetricsError):
    """Manifest or protocol document failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DuplicateCaseId(ParseError):
    """Two manifest cases share the same id."""


class BackendFailure(HipmetricsError):
    """Segmentation backend process failed.

    ``kind`` is one of ``"exit"``, ``"parse"``, ``"timeout"``.
    """

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class IoError(HipmetricsError):
    """Hard input/output failure (unreadable or unwritable artifact)."""


class InsufficientData(HipmetricsError):
    """Too few scored cases to compute a statistic."""
