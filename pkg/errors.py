# errors.py
"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI should return for it.
"""


class DocRepError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 2


class UsageError(DocRepError):
    """Bad command line or configuration key."""
    exit_code = 1


class InvalidInputError(DocRepError, ValueError):
    """An argument violates an operation's precondition."""
    exit_code = 2


class DataError(DocRepError):
    """Missing files, unreadable images, inconsistent datasets."""
    exit_code = 2


class FormatError(DataError):
    """Malformed persisted artifact (bad magic, truncation, dim mismatch)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(DocRepError):
    """Non-finite losses, gradients or parameters."""
    exit_code = 3
