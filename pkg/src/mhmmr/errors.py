"""Exception hierarchy shared across the package."""


class MhmmrError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MhmmrError, ValueError):
    pass


class NonMonotonicTime(ValidationError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"timestamps not strictly increasing at index {index}")


class NonFiniteValue(ValidationError):
    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at ({row}, {col})")


class LabelLengthMismatch(ValidationError):
    pass


class InvariantViolation(ValidationError):
    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"invariant violated: {which}" + (f" ({detail})" if detail else ""))


class DimensionMismatch(ValidationError):
    pass


class DegenerateWeights(MhmmrError, ValueError):
    pass


class SingularSystem(MhmmrError, ArithmeticError):
    pass


class CovarianceNotPD(MhmmrError, ArithmeticError):
    pass


class NumericalUnderflow(MhmmrError, ArithmeticError):
    pass


class TooFewSamples(MhmmrError, ValueError):
    pass


class LengthMismatch(MhmmrError, ValueError):
    pass


class UnknownChannel(MhmmrError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown channel"


class MissingLabels(MhmmrError, ValueError):
    pass


class InvalidSpec(MhmmrError, ValueError):
    pass


class MissingTimeColumn(MhmmrError, ValueError):
    pass


class ParseError(MhmmrError, ValueError):
    def __init__(self, row: int, col: str | int, message: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"cannot parse row {row}, column {col}" + (f": {message}" if message else ""))


class FormatVersionMismatch(MhmmrError, ValueError):
    pass
