"""Exception hierarchy; the CLI maps each family onto an exit code."""


class NlispecError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(NlispecError, ValueError):
    """Invalid parameters or a configuration that cannot be satisfied."""


class DomainError(ConfigurationError):
    """An argument lies outside the domain of the operation."""


class FormatError(NlispecError, ValueError):
    """Malformed spectrum data or file contents."""


class ReferenceInvalidError(NlispecError):
    """The reference envelope is too weak to divide by."""


class FitError(NlispecError, RuntimeError):
    """A nonlinear fit failed to converge.

    ``diagnostics`` carries the last parameter vector, residual norm and
    iteration count so callers can report instead of crash.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
