"""Exception hierarchy shared by every ddkit module.

Three top-level families map onto the CLI exit codes: parameter problems
(exit 1), data/storage problems (exit 2), numerical failures (exit 3).
"""


class DdkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DdkitError):
    """A parameter or precondition check failed before any work started."""


class DataError(DdkitError):
    """An input file or on-disk artifact is missing, malformed, or inconsistent."""


class ManifestError(DataError):
    """Trajectory manifest is missing, unparsable, or carries bad keys/values."""


class MissingFileError(DataError):
    """A file referenced by a manifest does not exist."""


class ChecksumMismatchError(DataError):
    """Stored checksum does not match file contents."""


class ShapeMismatchError(DataError):
    """Declared shape does not match the file's byte length or line count."""


class NormalizationError(DataError):
    """A probability row is out of [0, 1] or its sum is outside tolerance."""


class ConflictError(DataError):
    """An upsert collides with an existing record under a different key value."""


class ScorerError(DataError):
    """A patch scorer could not produce a score for every candidate."""


class NumericalError(DdkitError):
    """A computation is undefined or failed to converge."""


class DomainError(NumericalError):
    """Input lies outside the mathematical domain of the operation."""


class DegenerateTrajectoryError(NumericalError):
    """Trajectory-matching denominator vanished; the ratio cannot be formed."""


class UndefinedCorrelationError(NumericalError):
    """Rank correlation is undefined (constant input or too few points)."""


class FitFailureError(NumericalError):
    """Every optimizer start produced a non-finite objective."""
