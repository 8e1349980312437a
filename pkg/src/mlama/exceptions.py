"""Exception hierarchy shared by the library and the CLI."""


class MlamaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MlamaError, ValueError):
    """Unsupported or inconsistent configuration (constellation, family, sweep keys)."""


class DomainError(MlamaError, ValueError):
    """A numerical argument lies outside the domain of a function (e.g. tau <= 0)."""


class DetectorError(MlamaError, RuntimeError):
    """A detector failed to produce a finite estimate.

    Attributes
    ----------
    state : object or None
        The last finite iterate, when one is available.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class AnalysisError(MlamaError, RuntimeError):
    """State-evolution or scalar analysis did not produce a valid result."""
