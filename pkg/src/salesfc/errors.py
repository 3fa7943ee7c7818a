"""Exception hierarchy shared by every stage of the forecasting engine."""


class SalesfcError(Exception):
    """Base class; the CLI maps it to exit code 3 unless a subclass says otherwise."""

    exit_code = 3


class ConfigError(SalesfcError, ValueError):
    exit_code = 2

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SchemaError(SalesfcError):
    """A required column is missing from an input file."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class DataValueError(SalesfcError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateKeyError(SalesfcError):
    pass


class ContinuityError(SalesfcError):
    pass


class DayIndexError(SalesfcError):
    pass


class LengthError(SalesfcError, ValueError):
    pass


class DomainError(SalesfcError, ValueError):
    pass


class ShapeError(SalesfcError, ValueError):
    pass


class NumericalError(SalesfcError, ArithmeticError):
    pass


class EmptyDatasetError(SalesfcError):
    pass


class CoverageError(SalesfcError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)
