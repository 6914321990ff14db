"""Exception hierarchy shared by the library and the command line."""


class GfmmError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class PatternError(GfmmError, ValueError):
    """A pattern is malformed: missing label, wrong dimensions, unnormalized."""

    exit_code = 2


class DimensionError(PatternError):
    pass


class DataError(GfmmError, ValueError):
    """Bad input file contents (schema, CSV, results table)."""

    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ModelFormatError(DataError):
    """A serialized model cannot be read back."""


class NumericError(GfmmError, ArithmeticError):
    """A numerical routine failed to produce a defined value."""

    exit_code = 3
