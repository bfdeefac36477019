"""Exception types raised across the package."""


class EpikappaError(Exception):
    """Base class for all package errors."""


class ParameterValidationError(EpikappaError):
    """A parameter set violates one of its declared inequalities."""


class DegeneratePopulationError(EpikappaError):
    """The living population N - D is non-positive."""


class DivergenceError(EpikappaError):
    """Integration failed (step-size underflow or non-finite state).

    Carries the last time at which the state was still valid, and the
    shooting-window index when the failure happened inside a windowed loss.
    """

    def __init__(self, message, last_valid_time=None, window=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.window = window


class IngestionError(EpikappaError):
    """A dataset file failed validation; names the offending row/column."""


class GridMismatchError(EpikappaError):
    """Two series that must share a time grid do not."""
