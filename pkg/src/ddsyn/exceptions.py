"""Exception hierarchy shared across the package."""


class DdsynError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DdsynError, ValueError):
    """Matrix or vector dimensions do not conform."""


class NumericalFailureError(DdsynError, RuntimeError):
    """A numerical routine failed to converge or produced garbage."""


class DependentBasisError(DdsynError, ValueError):
    """Kernel components are (numerically) linearly dependent on the window."""


class UnderdeterminedError(DdsynError, ValueError):
    """Sample set does not determine the requested coefficients."""


class ExtractionError(DdsynError, RuntimeError):
    """Controller extraction failed (singular or ill-conditioned slack)."""


class InputError(DdsynError, ValueError):
    """Malformed problem description (JSON config, shapes, signs)."""
