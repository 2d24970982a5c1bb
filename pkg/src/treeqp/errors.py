"""Exception hierarchy."""


class TreeQPError(Exception):
    """Base class for every error raised by treeqp."""


class InstanceError(TreeQPError, ValueError):
    """The problem data is malformed (cycle, disconnected graph, bad diagonal...)."""


class ShapeError(TreeQPError, ValueError):
    """A solver was handed a graph shape it does not support."""


class DegeneratePieceError(TreeQPError, ValueError):
    """A quadratic piece that must be strongly convex is not."""


class NotPositiveDefiniteError(TreeQPError):
    """A nonpositive curvature appeared during the forward recursion."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


class InconsistentFunctionError(TreeQPError):
    """The breakpoint sweep met an input that is not semi-consistent."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


class NumericalDegeneracyError(TreeQPError):
    """A root search that must succeed found too few roots."""
