"""Exception hierarchy shared by every module in the package."""


class CommitError(Exception):
    """Base class for all package errors."""

    #: CLI exit status associated with this error family.
    exit_code = 3


class UsageError(CommitError, ValueError):
    """Bad command-line arguments or configuration."""

    exit_code = 1


class DataError(CommitError, ValueError):
    """Input data is malformed or inconsistent."""

    exit_code = 2


class NonFiniteError(DataError):
    """Input contains NaN or Inf."""


class DimensionMismatchError(DataError):
    """Array shapes do not agree."""


class NegativeInputError(DataError):
    """A transform that requires nonnegative values received a negative one."""


class NonPositiveError(DataError):
    """Log transform received a value that is not strictly positive after the offset."""


class ZeroVarianceError(DataError):
    """A constant vector was passed where a correlation is required."""


class ZeroVectorError(DataError):
    """A zero vector was passed where a direction is required."""


class ParseError(DataError):
    """CSV parsing failed; the message names the offending line and column."""

    def __init__(self, message, line=None, column=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.column = column


class RaggedRowsError(ParseError):
    pass


class NonNumericCellError(ParseError):
    pass


class TooFewSamplesError(DataError):
    """Cross-validation folds leave too few observations for fitting."""


class InvalidLayoutError(DataError):
    """Simulation block layout does not fit in p coordinates."""


class InvalidAlphaError(DataError):
    """Significance level outside (0, 1)."""


class OutOfRangeError(DataError):
    """A probability lies outside [0, 1]."""


class NumericalError(CommitError):
    """A numerical procedure failed."""

    exit_code = 3


class DidNotConvergeError(NumericalError):
    """Coordinate descent hit the sweep limit before meeting its tolerance."""


class DegenerateColumnError(NumericalError):
    """A column has no usable variation, or is fully explained by the others."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class AllAuxiliariesDegenerateError(NumericalError):
    """Every auxiliary fit was zero or collinear with an earlier one."""


class SfDegenerateError(NumericalError):
    """The (n - s) variance estimator needs fewer nonzeros than samples."""


class StudyFailedError(NumericalError):
    """Too many simulation replications failed."""
