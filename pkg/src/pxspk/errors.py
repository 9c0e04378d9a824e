"""Exception types shared across the package."""


class PxspkError(Exception):
    """Base class for all package errors."""


class InvalidParameter(PxspkError):
    """A value violates a documented domain constraint."""


class GridTooCoarse(PxspkError):
    """Grid does not resolve the medium correlation structure."""


class GridMismatch(PxspkError):
    """Two gridded objects live on incompatible grids."""


class StepOutsideBlock(PxspkError):
    """A solver step maps outside the synthesized medium block."""


class StepTooCoarse(PxspkError):
    """Solver step too large for the mapped medium correlation length."""


class DomainTooSmall(PxspkError):
    """Periodic domain cannot hold the requested source with margin."""


class PointOutsideDomain(PxspkError):
    """Requested sample point violates the configured boundary margin."""


class QuadratureNotConverged(PxspkError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class UnsupportedProfile(PxspkError):
    """Operation requires a profile family it does not support."""


class TooLarge(PxspkError):
    """Combinatorial guard tripped (moment order too high)."""


class InsufficientSamples(PxspkError):
    """Estimator needs more samples than were provided."""


class DegenerateIntensity(PxspkError):
    """Intensity statistics undefined (non-positive mean)."""


class ParseError(PxspkError):
    """Configuration file could not be read or parsed."""


class SchemaError(PxspkError):
    """Configuration violates the published schema."""
