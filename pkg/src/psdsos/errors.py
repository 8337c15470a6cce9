"""Exception types shared across the package."""


class PsdSosError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PsdSosError):
    """Malformed user input: bad file contents, bad schema, bad argument."""


class DimensionMismatchError(ValidationError):
    """Array shapes do not line up with the declared problem dimensions."""


class SymmetryError(ValidationError):
    """A matrix that must be symmetric is asymmetric beyond tolerance."""


class UnsupportedKernelError(PsdSosError):
    """Operation not defined for the requested kernel family."""


class IndefiniteMatrixError(PsdSosError):
    """A matrix required to be positive (semi)definite is not, even after
    the jitter ladder."""
