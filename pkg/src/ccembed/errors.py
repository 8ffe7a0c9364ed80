"""Exception types and process exit codes shared across the package."""

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_HYPOTHESIS_VIOLATION = 2
EXIT_NOT_CONVERGED = 3
EXIT_CONFIG_ERROR = 4


class CcembedError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionError(CcembedError):
    """Problem with an expression source string or syntax tree."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class ExpressionSyntaxError(ExpressionError):
    """Source string does not conform to the expression grammar."""


class UnknownIdentifierError(ExpressionError):
    """Identifier is neither a known function nor an allowed variable."""


class EvaluationError(CcembedError):
    """Expression evaluation failed or produced a non-finite value."""


class SpecValidationError(CcembedError):
    """Metric specification violates a structural requirement."""


class GridError(CcembedError):
    """Grid construction request is malformed or unsupported."""


class FlowError(CcembedError):
    """Collar flow integration failed."""


class FlowExitsChartError(FlowError):
    """A flow trajectory left the coordinate chart before reaching depth."""


class HypothesisViolation(CcembedError):
    """Curvature hypothesis fails: the boundary curvature reaches or
    exceeds the critical value somewhere, so no collar width works."""

    def __init__(self, message: str, node=None, k2: float | None = None):
        super().__init__(message)
        self.node = node
        self.k2 = k2


class QuadratureError(CcembedError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConsistencyError(CcembedError):
    """Two independent computations of the same quantity disagree."""


class RepresentabilityError(CcembedError):
    """Requested analytic embedding does not exist for the given data."""


class NotConvergedError(CcembedError):
    """Optimizer stopped without reaching the target residual."""


class DegeneratePlaneError(CcembedError):
    """Tangent plane spanned by (numerically) linearly dependent vectors."""


class NotABdfError(CcembedError):
    """Candidate function does not define a boundary defining function."""


class ConfigError(CcembedError):
    """Configuration file or override is invalid."""
