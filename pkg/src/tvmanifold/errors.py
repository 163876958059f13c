class TVManifoldError(Exception):
    """Base class for library errors."""


class ParameterError(TVManifoldError, ValueError):
    """Invalid or out-of-range input parameter."""


class DomainError(TVManifoldError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. a constant field)."""


class NumericError(TVManifoldError, RuntimeError):
    """A linear solve or iteration failed."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
