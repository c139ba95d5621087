"""Exception types raised by gliomorph operations."""


class GliomorphError(Exception):
    """Base class for all gliomorph errors."""


class VolumeFormatError(GliomorphError, ValueError):
    """Raised when a volume file is malformed or violates a volume invariant."""


class ManifestError(GliomorphError, ValueError):
    """Raised when a case manifest is malformed or internally inconsistent."""


class DegenerateInputError(GliomorphError, ValueError):
    """Raised when input data carries no usable signal (constant volume, empty mask, ...)."""


class DegenerateGeometryError(GliomorphError, ValueError):
    """Raised when a point set is rank deficient (coplanar/collinear) where full rank is required."""


class InsufficientBoundaryError(GliomorphError, ValueError):
    """Raised when a slice has too few boundary pixels for the per-slice shape features."""


class InsufficientDataError(GliomorphError, ValueError):
    """Raised when too few cases carry both imaging and genomic data for a test."""


class ConvergenceError(GliomorphError, RuntimeError):
    """Raised when an iterative solver hits its iteration cap without meeting its certificate."""
