"""
Exceptions raised by the squeeze film solvers.
"""


class ConfigurationError(ValueError):
    """Invalid configuration or inconsistent inputs."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        if self.field:
            return f"{self.field}: {self.args[0]}"
        return self.args[0]


class SolverError(RuntimeError):
    """Base class for numerical failures."""


class IterationError(SolverError):
    """A fixed point iteration failed to converge."""

    def __init__(self, message, ratios=None):
        super().__init__(message)
        self.ratios = list(ratios or [])


class QuenchImminentError(SolverError):
    """The gap dropped to a non-physical value."""

    def __init__(self, message, node=None, time=None, gap=None):
        super().__init__(message)
        self.node = node
        self.time = time
        self.gap = gap


class HorizonTooLargeError(SolverError):
    """The iteration left the ball on which the estimates hold."""


class NumericError(SolverError):
    """A linear algebra kernel failed."""


class StiffnessError(SolverError):
    """The time step required for stability underflowed."""
