"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: invalid input or
configuration -> 2, numerical failure -> 3, I/O failure -> 4.
"""


class EmufluxError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(EmufluxError, ValueError):
    """A precondition on an argument was violated."""


class InvalidStateError(EmufluxError, RuntimeError):
    """An object combination is inconsistent (stale cache, bad mode)."""


class NumericOverflowError(EmufluxError, ArithmeticError):
    """A non-finite value appeared where finite math was required."""


class TrainingDivergedError(EmufluxError, ArithmeticError):
    """Optimization produced no usable update for an entire epoch."""

    def __init__(self, message: str, member_index: int | None = None):
        super().__init__(message)
        self.member_index = member_index


class UnsupportedFormatError(EmufluxError, ValueError):
    """A file's magic number or version is not one we can read."""


class CorruptFileError(EmufluxError, ValueError):
    """A file parsed structurally but its contents are inconsistent."""
