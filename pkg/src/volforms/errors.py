"""Exception hierarchy shared by all modules."""


class ConfigurationError(ValueError):
    """Bad grid sizes, schedules, config files or CLI arguments."""


class DomainError(ValueError):
    """A field or argument lies outside the domain of an operation
    (inadmissible point of H, non-positive log argument, ...)."""


class SolverError(RuntimeError):
    """Numerical failure inside the solver.

    ``history`` carries whatever residual trace was available at the time
    of failure so callers can write partial diagnostics.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class StepFailure(SolverError):
    """Line search could not find an acceptable Newton step."""


class NonConvergence(SolverError):
    """Newton iteration hit its iteration cap."""


class ContinuationFailure(SolverError):
    def __init__(self, message, last_good_s=None, epsilon=None, history=None):
        super().__init__(message, history)
        self.last_good_s = last_good_s
        self.epsilon = epsilon
