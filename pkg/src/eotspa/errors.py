"""Exception types shared across the library."""


class EotError(Exception):
    """Base class for all library errors."""


class InvalidExtent(EotError):
    """Extent matrix is not symmetric positive semidefinite."""


class DegenerateSupport(EotError):
    """Shape support has zero volume (an eigenvalue is not positive)."""


class InvalidModel(EotError):
    """Model parameters violate their constraints."""


class NumericalFailure(EotError):
    """A numerical routine failed to produce a usable result."""


class NoExistence(EotError):
    """Operation requires a belief with positive existence probability."""


class ParseError(EotError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooLarge(EotError):
    """Instance exceeds the tractable size for exhaustive enumeration."""
