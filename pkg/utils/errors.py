"""Exception types raised by the solver, probe and configuration layers."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain an operation accepts."""


class UnsupportedGridError(ValueError):
    """The grid does not have the structure an operation needs."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class ConfigParseError(ValueError):
    """A run configuration could not be parsed or validated.

    Args:
        message (str): What went wrong
        line (int): 1-based line number in the config text, 0 when unknown
    """

    def __init__(self, message, line=0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class SolverFailureError(RuntimeError):
    """A linear or nonlinear solve did not reach its tolerance.

    Args:
        message (str): What went wrong
        trace (list[float]): Residual norm after each iteration
    """

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)


class EvolutionAborted(SolverFailureError):
    """A time step failed; ``trajectory`` holds every state computed before it."""

    def __init__(self, message, trajectory, trace=None):
        self.trajectory = trajectory
        super().__init__(message, trace)
