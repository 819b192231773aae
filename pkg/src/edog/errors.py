"""Exception types shared across the package.

The CLI maps ``DomainError`` to exit code 2 and ``SchemaError`` to exit code 3.
"""


class DomainError(ValueError):
    """An argument is outside the domain an operation accepts."""


class SchemaError(ValueError):
    """An input file or record does not follow the expected schema."""


class MalformedInputError(SchemaError):
    """An input file could not be parsed at all."""
