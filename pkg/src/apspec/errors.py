"""Exception hierarchy shared across the package."""


class ApspecError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ApspecError):
    """Invalid or inconsistent configuration input."""


class ResourceLimitError(ApspecError):
    """A configured enumeration or size cap was exceeded."""


class SmallDivisorError(ApspecError):
    """A gauge denominator fell below the guard threshold.

    Carries the offending frequency and sample point as ``frequency``
    and ``xi`` attributes.
    """

    def __init__(self, message, frequency=None, xi=None):
        super().__init__(message)
        self.frequency = frequency
        self.xi = xi


class ConvergenceError(ApspecError):
    """An iteration failed to reach its target within its budget."""


class QuadratureError(ApspecError):
    """Adaptive quadrature failed to converge at the requested tolerance."""


class InconsistencyError(ApspecError):
    """Numerical evidence contradicts a declared structural assumption."""


class UnsupportedConfigurationError(ApspecError):
    """The requested operation is outside the supported problem class."""
