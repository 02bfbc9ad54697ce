"""Exception hierarchy shared by the knockoff-lab library."""


class KnockoffLabError(Exception):
    """Base error carrying a message and optional detail lines."""

    def __init__(self, message: str, details: list[str] | None = None):
        self.message = message
        self.details = details or []
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if not self.details:
            return self.message
        detail_str = "\n  - ".join(self.details)
        return f"{self.message}\n  - {detail_str}"


class InvalidArgumentError(KnockoffLabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateSampleError(KnockoffLabError, ValueError):
    """A sample is too degenerate for the requested estimator."""


class DegenerateColumnError(KnockoffLabError, ValueError):
    """A design-matrix column has zero variance."""

    def __init__(self, column: int | str, message: str | None = None):
        self.column = column
        super().__init__(message or f"Column {column} has zero variance")


class DegenerateWeightsError(KnockoffLabError, ValueError):
    """A weight vector has zero norm where a direction is required."""


class TrainingDivergedError(KnockoffLabError):
    """Training produced a non-finite or exploding loss."""

    def __init__(self, message: str, last_rows: list[dict] | None = None):
        self.last_rows = last_rows or []
        details = [str(row) for row in self.last_rows]
        super().__init__(message, details)


class StageError(KnockoffLabError):
    """A pipeline stage failed; `stage` names where."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")
