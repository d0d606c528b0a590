"""Exception hierarchy shared by all modules."""


class ElsafeError(Exception):
    """Base class for every error raised by this package."""


class SingularDirection(ElsafeError):
    """Direction to an obstacle center is undefined (query point sits on it)."""


class RadiusTooSmall(ElsafeError):
    pass


class InvalidC0(ElsafeError):
    pass


class BudgetExceeded(ElsafeError):
    pass


class DecompositionFailed(ElsafeError):
    pass


class Infeasible(ElsafeError):
    """The halfspace intersection is empty (a dual ray was found)."""


class MaxIterations(ElsafeError):
    pass


class TooManyConstraints(ElsafeError):
    pass


class SynthesisFailed(ElsafeError):
    def __init__(self, condition: str, message: str):
        super().__init__(f"condition ({condition}): {message}")
        self.condition = condition


class DegenerateBasis(ElsafeError):
    pass


class SingularInertia(ElsafeError):
    pass


class FilterInfeasible(ElsafeError):
    """Raised by the closed loop when the outer QP has no solution."""

    def __init__(self, message: str, t: float, q, qdot):
        super().__init__(message)
        self.t = t
        self.q = q
        self.qdot = qdot


class ConfigError(ElsafeError):
    pass
