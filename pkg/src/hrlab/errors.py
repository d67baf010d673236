"""Exception types shared across hrlab."""


class HrlabError(Exception):
    """Base class for all hrlab errors."""


class DomainError(HrlabError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class NumericalError(HrlabError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    ``residual`` carries the best available error estimate.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AmbiguityError(DomainError):
    """More than one spectral point where exactly one was expected."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class CoverageError(DomainError):
    """No spectral point where exactly one was expected."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class DiagnosticError(HrlabError):
    """A fit or diagnostic could not be formed from the available samples."""

    def __init__(self, message, usable=0):
        super().__init__(message)
        self.usable = usable


class ConfigError(HrlabError):
    """Malformed experiment manifest; carries line and column."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column
