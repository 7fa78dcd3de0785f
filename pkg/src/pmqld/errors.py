"""Exception hierarchy shared by every pmqld module."""


class PmqldError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PmqldError, ValueError):
    """A parameter value violates a model constraint."""


class DomainError(PmqldError, ValueError):
    """A function argument lies outside the function's domain."""


class NumericError(PmqldError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class DataError(PmqldError, ValueError):
    """Input data is malformed or unusable."""


class EstimationError(PmqldError):
    """An estimator has no admissible solution for the given data."""


class ConvergenceError(EstimationError):
    """No optimizer start converged."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class GofError(PmqldError):
    """A goodness-of-fit test cannot be formed."""


class StudyError(PmqldError):
    """A Monte Carlo study produced too many failed replications."""
