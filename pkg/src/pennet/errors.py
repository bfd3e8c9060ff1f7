"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Input dimensions disagree with what an operation requires."""


class NonBinaryMaskError(ValueError):
    """A mask contained values other than 0 and 1."""


class AllHolesError(RuntimeError):
    """A mask level is entirely holes: no context patches to attend to."""


class ConfigError(ValueError):
    """Invalid model or training configuration."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, corrupt, or of an incompatible version."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN/inf loss."""
