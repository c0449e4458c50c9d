"""Exception hierarchy.

Every exception carries a machine-readable ``code`` string; the CLI maps
codes to exit statuses.
"""


class BridgeScaleError(Exception):
    code = "INTERNAL"


class NonFiniteInputError(BridgeScaleError, ValueError):
    code = "NON_FINITE_INPUT"


class NotPSDError(BridgeScaleError, ValueError):
    code = "NOT_PSD"


class NotPDError(BridgeScaleError, ValueError):
    code = "NOT_PD"


class NotPositiveError(NotPDError):
    """Raised when ``Q(X)`` of an iterate is not positive definite."""

    code = "NOT_POSITIVE"


class NotUnitaryError(BridgeScaleError):
    code = "NOT_UNITARY"


class NotUnitalError(BridgeScaleError, ValueError):
    code = "NOT_UNITAL"


class NotStochasticError(BridgeScaleError, ValueError):
    code = "NOT_STOCHASTIC"


class ZeroTraceError(BridgeScaleError, ValueError):
    code = "ZERO_TRACE"


class ZeroRowError(BridgeScaleError, ValueError):
    code = "ZERO_ROW"


class ZeroColumnError(BridgeScaleError, ValueError):
    code = "ZERO_COLUMN"


class DimensionMismatchError(BridgeScaleError, ValueError):
    code = "DIMENSION_MISMATCH"


class TargetMismatchError(BridgeScaleError, ValueError):
    code = "TARGET_MISMATCH"


class BandInvalidError(BridgeScaleError, ValueError):
    code = "BAND_INVALID"


class NotConvergedError(BridgeScaleError, ValueError):
    code = "NOT_CONVERGED"


class NoConvergenceError(BridgeScaleError):
    """Iteration budget exhausted.

    ``solution`` holds the last (unconverged) state so callers can inspect
    residuals and the iteration trace.
    """

    code = "NO_CONVERGENCE"

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ParseError(BridgeScaleError, ValueError):
    code = "PARSE_ERROR"


class ValidationError(BridgeScaleError, ValueError):
    code = "VALIDATION_ERROR"
