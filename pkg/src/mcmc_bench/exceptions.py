"""Exception types raised by the samplers, targets and harness."""


class ConfigurationError(ValueError):
    """Invalid parameter or incompatible combination of components."""


class InitializationError(ValueError):
    """The initial state has a non-finite log target value."""


class DegenerateWeightsError(FloatingPointError):
    """Every weight in a set is zero (``-inf`` in the log domain)."""

    def __init__(self, message="all weights are -inf", step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class SingularKernelError(FloatingPointError):
    """Cholesky factorization of a GP covariance failed."""


class SingularGeometryError(ValueError):
    """A position coincides with a sensor, so the log-distance is undefined."""


class UndefinedAutocorrelationError(ValueError):
    """Autocorrelation requested for a series with zero variance."""
