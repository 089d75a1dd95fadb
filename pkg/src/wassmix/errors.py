"""Exception types shared across the package."""


class WassmixError(Exception):
    """Base class for all package errors."""


class InvalidInputError(WassmixError, ValueError):
    """An argument violates a documented precondition or invariant."""


class DegenerateBaseError(WassmixError):
    """Location-scale fit received a base quantile function with zero variance."""


class NumericalError(WassmixError, RuntimeError):
    """A numerical routine produced non-finite values and had to abort."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ModelFormatError(WassmixError, ValueError):
    """A serialized model payload is malformed or has an unknown schema version."""


class DegenerateVarianceError(WassmixError):
    """R-squared is undefined because the observed outcomes have zero spread.

    The computed loss figures are attached so callers can still report them.
    """

    def __init__(self, message, per_sample=None, mean_loss=None):
        super().__init__(message)
        self.per_sample = per_sample
        self.mean_loss = mean_loss
