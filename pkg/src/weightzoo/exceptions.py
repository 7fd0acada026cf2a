"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it as the
first token of its one-line error message.
"""


class WeightZooError(Exception):
    category = "error"


class ValidationError(WeightZooError, ValueError):
    category = "validation"


class ShapeError(ValidationError):
    category = "shape"


class IdxFormatError(WeightZooError, ValueError):
    """Base for IDX parse failures."""

    category = "idx-format"


class BadMagicError(IdxFormatError):
    category = "idx-bad-magic"


class TruncatedFileError(IdxFormatError):
    category = "idx-truncated"


class CountMismatchError(IdxFormatError):
    category = "idx-count-mismatch"


class CheckpointError(WeightZooError):
    category = "checkpoint"


class VersionMismatchError(WeightZooError):
    category = "version-mismatch"


class LeakageError(ValidationError):
    """Two zoo records share every hyperparameter except the seed."""

    category = "leakage"


class UndefinedScoreError(WeightZooError, ValueError):
    category = "undefined-score"


class InstabilityError(WeightZooError, FloatingPointError):
    """Non-finite loss, gradient or update encountered during training."""

    category = "instability"


class SearchError(WeightZooError):
    category = "search"
