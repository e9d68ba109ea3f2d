"""Exception types shared across the package."""


class RejectedInputError(ValueError):
    """An argument violates an operation's precondition (shape, range, ...)."""


class FormatError(ValueError):
    """A binary file does not follow the expected layout."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericError(ArithmeticError):
    """A loss or intermediate quantity became non-finite."""
