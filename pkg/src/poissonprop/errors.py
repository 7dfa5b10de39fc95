"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A model or sampler was constructed with invalid parameters."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class OutOfWindowError(ValueError):
    """A radial query reached beyond the simulated disk."""


class TruncationRiskError(RuntimeError):
    """Points beyond ``r_max`` could contribute non-negligibly.

    ``suggested_r_max`` carries a radius that would satisfy the guard.
    """

    def __init__(self, message, suggested_r_max=None):
        super().__init__(message)
        self.suggested_r_max = suggested_r_max


class DegenerateMeasureError(ValueError):
    """A mean measure or count summary is identically zero."""


class InsufficientDataError(ValueError):
    pass


class DivergentMomentError(ArithmeticError):
    """A required fading moment is infinite."""


class ConfigError(ValueError):
    """Experiment configuration failed validation; ``path`` names the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
