"""Exception types raised by the design and evaluation routines."""


class IsacError(Exception):
    """Base class for all package errors."""


class InvalidInput(IsacError, ValueError):
    """Raised when an argument violates a documented precondition."""


class InfeasibleDetected(IsacError):
    """The power-minimisation problem has no feasible point at the requested distance.

    Attributes
    ----------
    d : float
        Squared-distance target at which infeasibility was detected.
    residual : float
        Largest constraint violation at the last iterate.
    group : int or None
        Group index when raised from a split (BDPS) subproblem.
    """

    def __init__(self, message, d=None, residual=None, group=None):
        super().__init__(message)
        self.d = d
        self.residual = residual
        self.group = group


class NoFeasiblePoint(IsacError):
    """Even the zero-distance problem is infeasible (configuration error)."""
