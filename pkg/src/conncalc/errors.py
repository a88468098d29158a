"""Exception hierarchy shared by all modules."""


class ConnCalcError(Exception):
    """Base class for library errors."""


class StructuralError(ConnCalcError, ValueError):
    """Shapes, categories or references do not fit together."""


class ValidationError(ConnCalcError):
    """A mathematical check failed; ``report`` carries the residuals."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class HypothesisError(ConnCalcError):
    """The hypotheses of a computation (periodicity, PF scaling, ...) are not met."""

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = tuple(failed)


class ConvergenceError(ConnCalcError):
    """An iteration ran out of budget; ``trace`` holds the residual history."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class SpectralError(ConnCalcError):
    """Spectral radius above one or a defective peripheral eigenvalue."""
