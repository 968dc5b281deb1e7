"""Exception types shared across the solver suite."""


class GridMismatchError(ValueError):
    """Two profiles that must share a grid do not."""


class DomainTruncationError(ValueError):
    """The exponential weight would overflow on the requested domain."""


class SolverFailureError(RuntimeError):
    """A linear solve did not reach the required residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BacktrackFailureError(RuntimeError):
    """The descent line search exhausted its backtrack budget."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class BracketLossError(RuntimeError):
    """A root bracket collapsed to equal signs (solver noise)."""

    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class BlowUpError(RuntimeError):
    """The time integration produced non-finite values."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NewtonDivergenceError(RuntimeError):
    """Newton iteration for an implicit step failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(ValueError):
    """A run configuration is missing or violates an invariant."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CheckpointError(ValueError):
    """A profile checkpoint file is malformed or inconsistent."""
