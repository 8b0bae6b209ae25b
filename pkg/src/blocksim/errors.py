"""Exception hierarchy shared by the parser, optimizer and simulators."""

from __future__ import annotations


class BlocksimError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedGateError(BlocksimError):
    pass


class ParseError(BlocksimError):
    """Malformed circuit, program or config text.

    ``line`` is 1-based and ``None`` when the error is not tied to one line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(BlocksimError):
    pass


class ContractError(BlocksimError):
    """A precondition of a simulation or optimization step was violated."""


class InfeasibleError(BlocksimError):
    """No valid gate block / buffer layout exists for the requested sizes."""
