"""Exception hierarchy shared by the estimators and the command line."""


class IsoconfError(Exception):
    """Base class for all package errors."""


class ValidationError(IsoconfError, ValueError):
    """Malformed input (non-increasing abscissae, bad indicators, ...)."""


class DomainError(IsoconfError, ValueError):
    """Argument outside the domain of the function."""


class ConstraintInfeasibleError(IsoconfError):
    """The requested side condition cannot be met by any admissible estimate."""


class DegenerateDataError(IsoconfError):
    """The data do not support the requested computation."""


class NumericError(IsoconfError, ArithmeticError):
    """An iterative solve failed to reach its tolerance.

    ``residuals`` carries whatever diagnostics the solver had when it stopped.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class CacheError(IsoconfError):
    """A quantile cache file is unreadable or fails its checksum."""
