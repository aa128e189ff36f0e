"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ModelInvalidError(ValueError):
    """A dependence model is inconsistent with its marginals."""


class SamplerStuckError(RuntimeError):
    """Rejection sampling exceeded its attempt budget."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Carries the partial ``value`` and an absolute error ``bound``.
    """

    def __init__(self, message, value=float("nan"), bound=float("inf")):
        super().__init__(message)
        self.value = value
        self.bound = bound


class NumericWarning(UserWarning):
    """Result is usable but its error estimate is larger than requested."""
