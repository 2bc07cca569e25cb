"""Exception types shared across the package."""


class GazePoolError(Exception):
    """Base class for all gazepool runtime errors."""


class FormatError(GazePoolError):
    """Malformed or inconsistent on-disk data (tensor files, logs, manifests)."""


class PipelineError(GazePoolError):
    """Invalid pipeline input, e.g. a trial with no usable fixations."""
