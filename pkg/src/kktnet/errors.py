"""Exception types raised across the package."""


class KKTNetError(Exception):
    """Base class for all package errors."""


class ValidationError(KKTNetError, ValueError):
    """Bad input or configuration supplied by the caller."""


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class AllZeroInstance(ValidationError):
    pass


class UnsupportedShape(ValidationError):
    pass


class EmptyBatch(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class EmptyTestSet(ValidationError):
    pass


class TooFewExamples(ValidationError):
    pass


class MissingGroundTruth(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class GenerationExhausted(KKTNetError, RuntimeError):
    pass


class MalformedRecord(KKTNetError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason
