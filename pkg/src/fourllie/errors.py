"""Exception hierarchy shared across the library."""


class FourLLIEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(FourLLIEError):
    """An array argument violates a documented precondition."""


class InvalidConfigError(FourLLIEError):
    """A model or training configuration is inconsistent or unusable."""


class ConjugateSymmetryError(FourLLIEError):
    """Inverse transform of a spectrum left a non-negligible imaginary part."""


class CheckpointError(FourLLIEError):
    """Base class for checkpoint read/write failures."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint file is truncated, has a bad magic tag, or is unparseable."""


class ConfigMismatchError(CheckpointError):
    """Checkpoint was produced under a different model configuration."""


class DatasetError(FourLLIEError):
    """Dataset root is missing files, has unmatched pairs, or is empty."""


class TrainingDivergedError(FourLLIEError):
    """Training produced a non-finite loss value."""
