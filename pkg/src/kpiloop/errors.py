"""Exception types shared across the package.

Every error carries a machine-readable ``code`` so the HTTP service can
return structured error payloads without mapping tables.
"""


class KpiLoopError(Exception):
    code = "internal"


class MalformedRow(KpiLoopError):
    code = "malformed_row"


class DuplicateTimestamp(KpiLoopError):
    code = "duplicate_timestamp"


class EmptySeries(KpiLoopError):
    code = "empty_series"


class InvalidParams(KpiLoopError):
    code = "invalid_params"


class BudgetExceedsPool(KpiLoopError):
    code = "budget_exceeds_pool"


class MissingClass(KpiLoopError):
    """Labeled feedback lacks one of the two classes; the offset cannot move."""

    code = "missing_class"


class NoGroundTruth(KpiLoopError):
    code = "no_ground_truth"


class LengthMismatch(KpiLoopError):
    code = "length_mismatch"


class InvalidSpec(KpiLoopError):
    code = "invalid_spec"


class ConfigError(KpiLoopError):
    code = "config_error"


class DatasetError(KpiLoopError):
    code = "dataset_error"


class UnknownSession(KpiLoopError):
    code = "unknown_session"


class UnknownPoint(KpiLoopError):
    code = "unknown_point"


class NotQueried(KpiLoopError):
    code = "not_queried"


class InvalidLabel(KpiLoopError):
    code = "invalid_label"


class NoLabels(KpiLoopError):
    code = "no_labels"


class RangeQueryError(KpiLoopError):
    code = "range_error"


class MissingClassWarning(UserWarning):
    """An update kept the old offset because one label class was absent."""
