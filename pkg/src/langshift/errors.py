"""Shared exception types.

Two families, mirrored by the command-line exit codes: ValueError subclasses
cover bad inputs and configuration (exit 1), RuntimeError subclasses cover
failures of an otherwise valid run (exit 2).
"""


class DimensionError(ValueError):
    """Array extents violate an operation's shape contract."""


class ParameterError(ValueError):
    """An argument value is outside its legal range."""


class InputError(ValueError):
    """Input data is empty, malformed, or insufficient for the request."""


class ConfigError(ValueError):
    """A configuration object or manifest is invalid."""


class ParseError(ValueError):
    """A file could not be parsed; the message carries path and line."""


class DataError(ValueError):
    """A data table is internally inconsistent."""


class StateError(RuntimeError):
    """An operation was invoked in a state that cannot support it."""


class IntegrityError(RuntimeError):
    """A checksum, hash, or fingerprint does not match its stored value."""


class NonFiniteError(RuntimeError):
    """A NaN or Inf appeared where a finite value is required."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss; carries the last good checkpoint."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
