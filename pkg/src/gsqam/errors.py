"""Exception hierarchy shared by the library and the CLI."""


class GsqamError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GsqamError, ValueError):
    """A scalar argument is outside its allowed range."""


class InvalidInputError(GsqamError, ValueError):
    """A structured input (levels, constellation, data table) is malformed."""


class ModelDomainError(GsqamError, ValueError):
    """The NLI model is evaluated outside its validity region (1 + c*K <= 0)."""


class NumericError(GsqamError, ArithmeticError):
    """A non-finite intermediate value was produced."""


class InvalidStartError(GsqamError, ValueError):
    """The optimiser start point has a non-finite objective."""


class FitError(GsqamError, ValueError):
    """Link parameters cannot be identified from the supplied data."""


class ParseError(GsqamError, ValueError):
    """A CSV or JSON file could not be parsed."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
