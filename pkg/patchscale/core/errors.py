class PatchScaleError(Exception):
    """Base class for every error raised by patchscale."""


class DataError(PatchScaleError):
    """Input data does not satisfy the documented format or invariants."""


class TradeParseError(DataError):
    """A trade-CSV row could not be parsed."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class TradeRejectedError(TradeParseError):
    """A trade-CSV row parsed but violates a Trade invariant (e.g. value <= 0)."""


class NumericalError(PatchScaleError):
    """Degenerate data for an estimator (zero variance, singular covariance, ...)."""


class InsufficientDataError(NumericalError):
    """Sample too small for the requested estimator."""


class PipelineStageError(PatchScaleError):
    """Raised by the pipeline when a stage fails; carries the stage name.

    The CLI maps the wrapped cause to an exit code.
    """

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
