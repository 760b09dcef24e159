"""Exception hierarchy.

Everything raised on purpose derives from :class:`LatentryError`.  The CLI
maps :class:`ConfigError` to exit 2, :class:`DataError` to exit 3 and
:class:`DivergedLoss` to exit 4.
"""


class LatentryError(Exception):
    pass


class ConfigError(LatentryError):
    pass


class DataError(LatentryError):
    pass


class MissingColumn(DataError):
    pass


class EmptyDataset(DataError):
    pass


class RaggedRows(DataError):
    pass


class AllFeaturesExcluded(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NoObservations(DataError):
    pass


class ConditionMismatch(DataError):
    pass


class SessionMismatch(DataError):
    pass


class MissingReference(DataError):
    pass


class UnknownCondition(DataError):
    pass


class EmptySide(DataError):
    pass


class TooFewPairs(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyBatch(DataError):
    pass


class DivergedLoss(LatentryError):
    """Training loss became NaN or infinite."""
