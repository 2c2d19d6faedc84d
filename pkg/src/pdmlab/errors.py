"""Exception hierarchy shared by every pdmlab module."""


class PdmError(Exception):
    """Base class for all pdmlab errors."""


class InputError(PdmError, ValueError):
    """Non-finite or malformed numeric input."""


class DomainError(PdmError, ValueError):
    """Evaluation point outside a model's validity domain."""


class ParameterError(PdmError, ValueError):
    """Parameter set for which a closed form or model is undefined."""


class MonotonicityError(PdmError, ValueError):
    """The time-rescaling factor is non-positive, so tau(t) is not invertible."""


class NonInvertibleError(PdmError, ValueError):
    """A point map has no pointwise inverse, or q lies outside its image."""


class UnsupportedError(PdmError, ValueError):
    """Requested operation is not defined for the given inputs."""


class WindowError(PdmError, ValueError):
    """Closed form evaluated outside its validity window."""


class CatalogError(PdmError, KeyError):
    """Unknown catalog model name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(PdmError, ValueError):
    """Invalid experiment configuration."""


class StepLimitError(PdmError, RuntimeError):
    """Integrator exhausted its step budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class TruncatedTrajectoryError(PdmError, RuntimeError):
    """Trajectory left the validity region; ``partial`` holds the samples so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
