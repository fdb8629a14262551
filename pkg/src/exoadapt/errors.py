"""Exception taxonomy shared across the toolkit.

Every error raised by library code derives from ExoAdaptError so callers
(and the CLI) can separate expected failures from bugs.
"""


class ExoAdaptError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(ExoAdaptError, ValueError):
    """A parameter is outside its documented range."""


class InsufficientDataError(ExoAdaptError, ValueError):
    """Not enough samples/records to perform the operation."""


class SpanRangeError(ExoAdaptError, ValueError):
    """A requested span or probe point lies outside the data."""


class SchemaError(ExoAdaptError, ValueError):
    """Malformed input file, record, or unknown label/key."""


class ShapeError(ExoAdaptError, ValueError):
    """Grids or arrays that must align do not."""


class ConditioningError(ExoAdaptError, RuntimeError):
    """Kernel matrix is numerically singular even after jitter."""


class ConvergenceError(ExoAdaptError, RuntimeError):
    """Iterative fit did not converge; carries the best parameters seen."""

    def __init__(self, message, best_params=None, residual_rms=None):
        super().__init__(message)
        self.best_params = best_params
        self.residual_rms = residual_rms


class NoCandidatesError(ExoAdaptError, ValueError):
    """Scoring was asked to rank an empty detection list."""


class InvalidCropError(ExoAdaptError, ValueError):
    """Crop rectangle does not intersect the frame."""


class SequencingError(ExoAdaptError, ValueError):
    """Events arrived out of time order."""


class BackendError(ExoAdaptError, RuntimeError):
    """Classifier backend unavailable, timed out, or returned garbage."""
