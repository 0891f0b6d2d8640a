"""Exception hierarchy shared by all modules."""


class FacetQPError(Exception):
    """Base class for every error raised by facetqp."""


class DimensionMismatch(FacetQPError, ValueError):
    pass


class NumericalBreakdown(FacetQPError, ArithmeticError):
    """A factorization or curvature quantity left the admissible range."""


class NotPositiveDefinite(NumericalBreakdown):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class BreakdownNonpositivePivot(NumericalBreakdown):
    """IC(0) hit a non-positive pivot caused by the dropped fill-in."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ZeroDiagonal(NumericalBreakdown):
    pass


class SingularCurvature(NumericalBreakdown):
    """Non-positive curvature ``d^T A d`` along a search direction."""


class NotSymmetric(FacetQPError, ValueError):
    pass


class InfeasiblePoint(FacetQPError, ValueError):
    pass


class StaleFactorization(FacetQPError, RuntimeError):
    """The face preconditioner was built on a different free set."""


class DenseCapExceeded(FacetQPError, ValueError):
    pass


class NoFeasibleKkt(FacetQPError, RuntimeError):
    pass


class EigenNotConverged(FacetQPError, RuntimeError):
    pass


class MaxIterationsExceeded(FacetQPError, RuntimeError):
    """Raised by ``solve(..., strict=True)``; the partial report rides along."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
