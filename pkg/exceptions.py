"""Error hierarchy shared by the simulator, the CLI and the JSON API."""


class DistillationError(Exception):
    """Base class for every error raised by the simulator"""
    exit_code = 1
    http_status = 400


class InvalidMatrixError(DistillationError, ValueError):
    pass


class DimensionError(DistillationError, ValueError):
    pass


class UnphysicalStateError(DistillationError, ValueError):
    pass


class ChannelError(DistillationError, ValueError):
    pass


class UnsupportedInputError(DistillationError, ValueError):
    pass


class CalibrationError(DistillationError, ValueError):
    pass


class ConfigError(DistillationError, ValueError):
    exit_code = 2


class DegenerateSelectionError(DistillationError, ValueError):
    """Raised when post-selection keeps (almost) nothing.

    The Monte Carlo engine attaches its pre-selection statistics so the
    caller can still report what was sampled.
    """
    exit_code = 3

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ArtifactError(DistillationError, OSError):
    http_status = 500

    def __init__(self, message, path=None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path
