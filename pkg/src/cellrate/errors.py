"""Exception types shared across the package."""


class CellrateError(Exception):
    """Base class for package-specific errors."""


class DomainError(CellrateError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class EmptyInputError(DomainError):
    """An input collection that must be nonempty was empty."""


class NoInterferenceError(DomainError):
    """Interference-limited formula undefined (fewer than two users)."""


class LayoutMismatchError(CellrateError, ValueError):
    """Operation applied to the wrong antenna layout."""


class InfeasibleError(CellrateError, ValueError):
    """Parameter combination outside the feasible region (e.g. L < K)."""


class SingularGeometryError(CellrateError, ValueError):
    """Degenerate geometry such as a zero user-antenna distance."""


class SingularChannelError(CellrateError, ValueError):
    """Channel matrix (or vector) is degenerate beyond the conditioning threshold."""


class IllConditionedError(CellrateError, ArithmeticError):
    """Closed form is numerically untrustworthy; caller should fall back to Monte Carlo."""


class QuadratureError(CellrateError, RuntimeError):
    """Adaptive integration did not reach the requested accuracy.

    Carries the best available estimate and its error bound.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
