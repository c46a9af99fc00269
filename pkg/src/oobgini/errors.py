"""Exception hierarchy shared by the loaders, model code and CLI."""


class OobGiniError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(OobGiniError, ValueError):
    """Malformed input file. ``row`` is the 1-based line number when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class SchemaError(OobGiniError, ValueError):
    pass


class DomainError(OobGiniError, ValueError):
    """Input is well-formed but outside what the model can handle."""


class InsufficientOobSupport(OobGiniError, ValueError):
    """A node has too few out-of-bag rows for the requested impurity."""
