"""Exception types shared across the toolkit."""


class DelayRingError(Exception):
    """Base class for all toolkit errors."""


class TopologyError(DelayRingError, ValueError):
    """Invalid network, delay model or gain profile."""


class UnstableError(DelayRingError, ValueError):
    """A variance was requested outside the mean-square stability region."""


class InfeasibleDesignError(DelayRingError):
    """A gain design places some eigenvalue outside the stability region."""


class ConvergenceError(DelayRingError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
