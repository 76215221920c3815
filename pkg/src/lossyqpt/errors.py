"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for every error raised by this package."""


class RepresentationError(TomographyError):
    """A matrix or basis violates a structural requirement (shape,
    Hermiticity, normalization, dimension mismatch)."""


class NotPsdError(TomographyError):
    """A matrix that must be positive semidefinite has an eigenvalue
    below the allowed clamp tolerance."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularSystemError(TomographyError):
    """A linear system is rank deficient beyond pseudo-inverse tolerance."""


class DegenerateFitError(TomographyError):
    """The optimizer failed to produce a usable fit."""


class DataError(TomographyError):
    """Malformed or inconsistent input data (count tables, JSON files)."""
