"""Exception hierarchy shared by all align_lab modules."""


class AlignLabError(ValueError):
    pass


class ZeroSum(AlignLabError):
    pass


class NegativeEntry(AlignLabError):
    pass


class DimensionMismatch(AlignLabError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class InvalidTemperature(AlignLabError):
    pass


class InvalidOmega(AlignLabError):
    pass


class InvalidClassCount(AlignLabError):
    pass


class EmptyBatch(AlignLabError):
    pass


class AllZeroConfidence(AlignLabError):
    pass


class EmptyQueue(AlignLabError):
    pass


class NonFiniteInput(AlignLabError):
    pass


class OutOfRange(AlignLabError):
    pass


class EmptyLabeledSet(AlignLabError):
    pass


class EmptyEvalSet(AlignLabError):
    pass


class UndefinedMetric(AlignLabError):
    pass


class InvalidSpec(AlignLabError):
    pass


class InfeasibleSplit(AlignLabError):
    pass


class ParseError(AlignLabError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RaggedRow(ParseError):
    pass


class UnknownLabel(ParseError):
    pass


class MissingRecords(AlignLabError):
    pass


class ConfigError(AlignLabError):
    pass
