"""Exception types raised across the package."""


class ContactTopoptError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ContactTopoptError, ValueError):
    """Invalid domain, boundary, or configuration input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvertedElementError(ContactTopoptError):
    """A mesh update produced a triangle with nonpositive area.

    Callers performing step control catch this and retry with a smaller step.
    """

    def __init__(self, message, triangles=None):
        super().__init__(message)
        self.triangles = triangles


class SolverError(ContactTopoptError, RuntimeError):
    """Linear or nonlinear solver failure."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
