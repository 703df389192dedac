"""Exception types raised by the library."""
import numpy as np


class ContractError(ValueError):
    """Inputs violate an operation's shape or domain contract."""


class NonFiniteGradientError(ContractError):
    """A gradient contained NaN or infinite entries."""


class SingularGramError(np.linalg.LinAlgError):
    """An r x r Gram matrix is too ill-conditioned to invert without regularization."""


class ConfigError(ValueError):
    """A harness configuration file could not be parsed or validated."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
