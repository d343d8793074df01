"""Exception and warning types shared across the package."""


class GyrocalError(Exception):
    """Base class for errors raised by this package."""


class DataFormatError(GyrocalError):
    """Malformed or inconsistent input data (CSV schema, row contents, coverage)."""


class WeightFileError(GyrocalError):
    """Base class for weight-container problems."""


class BadMagicError(WeightFileError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(WeightFileError):
    """Container format version is not supported."""


class TruncatedFileError(WeightFileError):
    """Payload ends before the declared number of values."""


class NonFiniteWeightError(WeightFileError):
    """Weight values contain NaN or infinity."""


class NumericError(GyrocalError):
    """Base class for numeric failures during optimization."""


class TrainingDivergedError(NumericError):
    """Loss became non-finite or exploded; carries the loss trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class NonFiniteGradientError(NumericError):
    """A gradient entry is NaN or infinite; names the offending parameter."""


class GimbalLockWarning(UserWarning):
    """Pitch is within tolerance of +/-90 degrees; roll and yaw are degenerate."""
