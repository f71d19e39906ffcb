"""Exception types raised by the toolkit.

Everything that signals bad *data* (as opposed to a programming error)
derives from :class:`DataError`; the CLI maps those to exit code 3.
"""


class DataError(ValueError):
    """Input data cannot be processed."""


class PointBehindCamera(DataError):
    pass


class NonPositiveRange(DataError):
    pass


class DegenerateConfiguration(DataError):
    pass


class EmptyInput(DataError):
    pass


class TooFewSamples(DataError):
    pass


class DegenerateRelativeMap(DataError):
    pass


class InsufficientValidCells(DataError):
    pass


class DegenerateRing(DataError):
    pass


class InvalidModel(DataError):
    pass


class EmptyLinkSet(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyDatabase(DataError):
    pass


class NoValidQueries(DataError):
    pass


class EmptyStream(DataError):
    pass


class RayMiss(DataError):
    pass
