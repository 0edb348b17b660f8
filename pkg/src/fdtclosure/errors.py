"""Exception hierarchy shared by all modules."""


class FdtClosureError(Exception):
    """Base class for every error raised by the package."""


class StateValidationError(FdtClosureError, ValueError):
    """A state vector contains non-finite entries or has the wrong shape."""


class DimensionError(FdtClosureError, ValueError):
    """Array lengths are inconsistent with the model dimensions."""


class ParameterError(FdtClosureError, ValueError):
    """Model or plan parameters violate their invariants."""


class BlowUpError(FdtClosureError, FloatingPointError):
    """Time integration produced non-finite values.

    Attributes
    ----------
    time : float
        Model time of the first check that failed.
    max_abs : float
        Largest finite absolute entry of the last good state.
    """

    def __init__(self, time, max_abs, context=""):
        self.time = float(time)
        self.max_abs = float(max_abs)
        self.context = context
        msg = f"integration blew up at t={self.time:.6g} (last max|state|={self.max_abs:.4g})"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class DegenerateVarianceError(FdtClosureError, ValueError):
    """A long-run standard deviation collapsed to (numerically) zero."""


class InsufficientSamplesError(FdtClosureError, ValueError):
    """A statistic was requested from too few samples."""


class GridMismatchError(FdtClosureError, ValueError):
    """Two curves or signals do not share the same grid."""


class ConfigError(FdtClosureError, ValueError):
    """An experiment configuration cannot be resolved."""


class ConfigConflictError(FdtClosureError):
    """A stored artifact was produced by a different configuration."""


class ChecksumError(FdtClosureError):
    """A stored artifact failed its integrity check."""


class FormatVersionError(FdtClosureError):
    """A stored artifact has an unsupported format version."""


class StageError(FdtClosureError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
