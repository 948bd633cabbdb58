"""Exception hierarchy shared by all modules."""


class DBurrError(Exception):
    """Base class for errors raised by this package."""


class DomainError(DBurrError, ValueError):
    """An argument lies outside the domain of the function."""


class MomentDoesNotExistError(DomainError):
    """The requested moment is infinite for the given parameters."""


class DegenerateDataError(DBurrError, ValueError):
    """The sample does not identify the requested parameters."""


class ConvergenceError(DBurrError, RuntimeError):
    """An iterative routine stopped before meeting its tolerance.

    ``best`` carries the best iterate found so far (or None).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InternalConsistencyError(DBurrError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
