"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Invalid or unparseable configuration input.

    Carries the offending key path or the violated invariant in the message.
    """


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class GeometryError(ValueError):
    """Degenerate geometry (coincident dipoles, undefined target direction)."""


class SolverError(RuntimeError):
    """Nonlinear solve did not converge.

    Never a silent wrong answer: carries the best iterate found and its
    residual infinity norm so callers can diagnose or retry.
    """

    def __init__(self, message, best=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm
        self.iterations = iterations


class DesignError(RuntimeError):
    """Stiffness design step failed; ``stage`` is the failing segment index."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
