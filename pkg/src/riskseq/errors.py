"""Exception taxonomy shared across the engine.

The CLI maps these onto its exit-code contract:
config/validation problems exit 1, file/format problems exit 2,
numerical aborts exit 3.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid or inconsistent configuration."""


class ValidationError(EngineError):
    """Input data or arguments violate a documented precondition."""


class DimensionError(ValidationError):
    """Array shapes do not conform; message names both shapes."""


class DataFormatError(EngineError):
    """A file does not conform to its interchange grammar."""


class IntegrityError(DataFormatError):
    """A binary container is truncated or fails its checksum."""


class IncompatibleCheckpointError(ConfigError):
    """Checkpoint header does not match the requested model configuration."""


class NumericalAbort(EngineError):
    """Training produced a non-finite loss; carries diagnostics."""

    def __init__(self, message, epoch=None, batch=None, max_param=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.max_param = max_param
