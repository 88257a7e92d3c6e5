"""Exception types shared across the package."""


class MismacError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfig(MismacError):
    """A configuration document or channel description failed validation."""


class UnsupportedMass(MismacError):
    """A distribution places mass where the decoding metric is zero."""


class InfeasibleSupport(MismacError):
    """A requested quantization or composition cannot be realized."""


class BudgetExceeded(MismacError):
    """An enumeration exceeded its evaluation budget."""


class EmptyFeasibleSet(MismacError):
    """No grid point satisfies the constraint set."""


class SolverFailure(MismacError):
    """The convex solver did not return a usable answer."""
