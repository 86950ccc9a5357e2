"""Exception types raised by critwork."""


class CritworkError(Exception):
    """Base class for all library errors."""


class PoleError(CritworkError, ValueError):
    """A function was evaluated at one of its poles."""


class DomainError(CritworkError, ValueError):
    """An argument lies outside the supported domain."""


class DivergenceError(CritworkError, ArithmeticError):
    """The requested quantity is infinite (e.g. Psi_0(0) at Delta = 1/2)."""


class QuadratureError(CritworkError, ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""


class ObservableUnavailable(CritworkError, LookupError):
    """A model does not provide the equilibrium observable that was asked for."""


class PropagatorNotConverged(CritworkError, ArithmeticError):
    """Step halving of the time-evolution operator did not converge."""


class DimensionTooLarge(CritworkError, ValueError):
    """Requested many-body Hilbert space exceeds the dense-ED cap."""
