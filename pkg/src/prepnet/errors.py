"""Exception hierarchy shared across the package."""


class PrepNetError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(PrepNetError):
    """Input violates a documented precondition or invariant."""


class ConfigError(ValidationError):
    """A configuration object is internally inconsistent."""


class ManifestError(ValidationError):
    """A dataset manifest is malformed or references bad data."""


class UndefinedMetricError(ValidationError):
    """A metric is requested on data where it is mathematically undefined."""


class CheckpointError(PrepNetError):
    """Base class for checkpoint I/O failures."""


class IncompatibleCheckpointError(CheckpointError):
    """Checkpoint was produced by a different model configuration."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint file is truncated or fails integrity checks."""


class TrainingError(PrepNetError):
    """Training aborted (e.g. a loss became non-finite)."""
