"""Exception hierarchy shared across the package.

Every failure the CLI and service report maps onto one of these classes;
the process exit code and HTTP error kind are derived from the class.
"""


class CplError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CplError):
    """Invalid sizes, shapes, parameter values, or variant combinations."""


class DegenerateVectorError(ConfigurationError):
    """A vector that must be non-zero has zero norm."""


class DegeneratePlaneError(ConfigurationError):
    """Two vectors meant to span a plane are parallel or antiparallel."""


class DataError(CplError):
    """Malformed dataset files or unusable dataset contents."""


class NumericError(CplError):
    """Non-finite values where finite numbers are required."""
