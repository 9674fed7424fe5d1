"""Exception hierarchy shared by the library and the CLI.

Each error class maps to one CLI exit code, so raising the right type deep
in the library is enough for the command line to report correctly.
"""


class GrafError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(GrafError):
    """Invalid arguments or configuration (CLI exit code 2)."""

    exit_code = 2


class DataError(GrafError):
    """Malformed input data or model files (CLI exit code 3)."""

    exit_code = 3


class InternalError(GrafError):
    """An internal invariant was violated; indicates a bug (CLI exit code 4)."""

    exit_code = 4


class StratificationWarning(UserWarning):
    """A class has fewer members than requested folds; folds proceed anyway."""
