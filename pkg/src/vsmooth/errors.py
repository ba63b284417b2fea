"""Exception hierarchy. The class name doubles as the CLI error code."""


class VSmoothError(ValueError):
    """Base class for every error raised by the toolkit."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidLogits(VSmoothError):
    pass


class InvalidInput(VSmoothError):
    pass


class EmptyInput(VSmoothError):
    pass


class KernelTooLarge(VSmoothError):
    pass


class InsufficientRows(VSmoothError):
    pass


class InsufficientMembers(VSmoothError):
    pass


class InvalidTemperature(VSmoothError):
    pass


class EmptyValidationSet(VSmoothError):
    pass


class InvalidLabel(VSmoothError):
    pass


class LengthMismatch(VSmoothError):
    pass


class EmptyEvaluationSet(VSmoothError):
    pass


class InvalidSpec(VSmoothError):
    pass


class EmptyDataset(VSmoothError):
    pass


class ShapeError(VSmoothError):
    pass


class ConfigError(VSmoothError):
    pass


class FormatError(VSmoothError):
    """Parse failure in one of the versioned text formats."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MalformedHeader(FormatError):
    pass


class RowCountMismatch(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass
