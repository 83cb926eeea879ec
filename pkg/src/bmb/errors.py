"""Exception types shared across the package."""


class BmbError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(BmbError):
    """Matrix failed a positive-definiteness check.

    ``pivot_index`` is the 0-based index of the first failing Cholesky pivot
    when known, else None.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class DimensionMismatch(BmbError):
    pass


class UnknownVariable(BmbError):
    pass


class EmptyQuery(BmbError):
    pass


class QueryIsEverything(BmbError):
    pass


class InvalidDegreesOfFreedom(BmbError):
    pass


class InvalidParameter(BmbError):
    pass


class NonConvergence(BmbError):
    pass


class EmptyInterval(BmbError):
    pass


class LagTooLarge(BmbError):
    pass


class ConstantSeries(BmbError):
    pass


class SeriesTooShort(BmbError):
    pass


class ConstantVariable(BmbError):
    pass


class InsufficientSamples(BmbError):
    pass


class DataFormatError(BmbError):
    """Input file is unreadable or structurally malformed."""
