"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its contract."""


class ConfigError(ValueError):
    """Invalid model or training configuration."""


class CheckpointError(IOError):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or otherwise unparseable checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with an unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint file ended mid-record."""


class CheckpointConfigError(CheckpointError):
    """Checkpoint config does not match the requested config."""


class DatasetError(IOError):
    """Dataset file is missing, corrupt or truncated."""


class EmptyMaskError(ValueError):
    """A mask-consuming operation received an all-background mask."""


class DegenerateGeometryError(ValueError):
    """Geometry input collapses (zero-length axis, collinear endpoints, ...)."""


class TrainingDiverged(RuntimeError):
    """Training loss became NaN/Inf."""
