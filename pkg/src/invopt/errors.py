"""Exception types shared across the package."""

from __future__ import annotations


class InputError(ValueError):
    """Malformed input: dimension mismatch, non-finite entries, point not in a set."""


class ConfigError(ValueError):
    """Invalid experiment or learner configuration."""


class ProtocolError(RuntimeError):
    """Learner used out of order, or feedback inconsistent with the protocol."""


class NumericError(ArithmeticError):
    """A numerical routine could not meet its accuracy contract."""


class ExperimentError(RuntimeError):
    """Failure inside the round loop; carries the 1-based round index."""

    def __init__(self, round_index: int, cause: BaseException):
        super().__init__(f"round {round_index}: {type(cause).__name__}: {cause}")
        self.round_index = round_index
        self.cause = cause
