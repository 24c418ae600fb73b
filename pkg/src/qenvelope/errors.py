"""Exception types shared across the package."""


class NonMonotoneError(ValueError):
    """A penalty sequence has a decreasing entry."""


class NegativeEntryError(ValueError):
    """A penalty sequence has a negative entry."""


class FiniteAfterInfiniteError(ValueError):
    """A finite penalty entry follows an infinite one."""


class UnboundedPenaltyError(ArithmeticError):
    """The envelope value is +inf (first penalty entry infinite, x nonzero)."""


class NotTightPointError(ValueError):
    """The point has a sorted magnitude strictly inside (0, sqrt(g_i))."""


class GapNotClosedError(RuntimeError):
    """The weighted prox could not certify the requested duality gap.

    Carries the best iterate found and the gap that was achieved.
    """

    def __init__(self, message, x=None, gap=None):
        super().__init__(message)
        self.x = x
        self.gap = gap


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes."""


class StepTooLargeError(ValueError):
    """The forward-backward step violates step * ||A||^2 <= 1 (or the
    envelope-specific bound step <= 1/2)."""


class ProxFailureError(RuntimeError):
    """A prox subproblem inside the solver failed to certify its tolerance."""

    def __init__(self, message, x=None, gap=None):
        super().__init__(message)
        self.x = x
        self.gap = gap


class SvdFailureError(RuntimeError):
    """Dense SVD did not converge."""


class BudgetExceededError(ValueError):
    """Exact support enumeration was requested but exceeds the budget."""


class DeltaOutOfRangeError(ValueError):
    """A restricted-isometry constant is outside the admissible range."""


class InfeasibleNoiseLevelError(ValueError):
    """No noise magnitude realizes the requested noise-to-data ratio."""


class KernelConstructionFailedError(RuntimeError):
    """Could not scale a dense kernel vector to meet the magnitude floor."""
