from typing import Optional, Tuple


class DimensionMismatchError(ValueError):
    """Raised when two inputs disagree on a named dimension (n, p, d)."""

    def __init__(self, dimension: str, expected: int, actual: int, context: str = "") -> None:
        self.dimension = dimension
        self.expected = expected
        self.actual = actual
        where = f" in {context}" if context else ""
        super().__init__(f"Dimension '{dimension}' mismatch{where}: expected {expected}, got {actual}.")


class NumericalError(RuntimeError):
    """Raised when a quantity that is non-negative by construction comes out negative or non-finite."""


class ConfigurationError(ValueError):
    """Raised when an experiment configuration is inconsistent, before any compute starts."""


class DataFormatError(ValueError):
    """Raised when an input file cannot be parsed; carries the offending location."""

    def __init__(self, path: str, message: str, line: Optional[int] = None, cell: Optional[Tuple[int, int]] = None):
        self.path = path
        self.line = line
        self.cell = cell
        location = ""
        if line is not None:
            location = f" (line {line})"
        elif cell is not None:
            location = f" (row {cell[0]}, column {cell[1]})"
        super().__init__(f"{path}{location}: {message}")


class StageError(RuntimeError):
    """Raised by the director when a pipeline stage fails."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
