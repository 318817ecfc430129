"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: config errors exit 2, data
errors exit 3, privacy-infeasible conditions exit 4.
"""


class IclpError(Exception):
    """Base class for all library errors."""


class ConfigError(IclpError):
    """Invalid parameter, flag, or configuration value."""


class DataError(IclpError):
    """Input data violates a precondition (shape, range, degeneracy)."""


class GridMismatchError(DataError):
    """Operands live on different grids."""


class ParseError(DataError):
    """Malformed CSV input; message carries row/column location."""

    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc += f" at row {row}"
        if column is not None:
            loc += f", column {column}"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class DegenerateKernelError(DataError):
    """Every eigenvalue fell below the spectral floor."""


class PrivacyInfeasibleError(IclpError):
    """No noise scale can certify the requested privacy level."""
