"""Exception hierarchy shared by all modules."""


class LassoPathsError(Exception):
    """Base class for every error raised by this package."""


class GraphError(LassoPathsError, ValueError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class NonPositiveWeight(GraphError):
    pass


class Disconnected(GraphError):
    pass


class VertexOutOfRange(GraphError, IndexError):
    pass


class InvalidPath(GraphError):
    pass


class NotATree(GraphError):
    pass


class DimensionMismatch(LassoPathsError, ValueError):
    pass


class NotPositiveDefinite(LassoPathsError, ValueError):
    pass


class CgStagnation(LassoPathsError, RuntimeError):
    """Conjugate gradient did not reach its tolerance.

    The partial :class:`~lasso_paths.linalg.CgResult` is kept on ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class AssumptionA1Violated(LassoPathsError):
    """Shortest paths from the source or target are not unique."""


class NumericalBreakdown(LassoPathsError, ArithmeticError):
    pass


class FactorizationFailure(LassoPathsError, RuntimeError):
    pass


class MaxIterExceeded(LassoPathsError, RuntimeError):
    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace


class NoPathAtThreshold(LassoPathsError):
    pass


class InfeasibleEdgeCount(LassoPathsError, ValueError):
    pass


class ImageTooSmall(LassoPathsError, ValueError):
    pass


class NotNeighbors(LassoPathsError, ValueError):
    pass
