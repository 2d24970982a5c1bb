"""Exact solver for quadratic problems with indicator variables on tree-structured Q.

    min 0.5 x'Qx + c'x + lam'z   s.t.  x_i (1 - z_i) = 0,  z binary,

where the off-diagonal support of ``Q`` is a tree.  The solver runs a
parametric dynamic program over piecewise quadratic costs and their
conjugates; see :mod:`treeqp.solver`.
"""

from . import kernels
from .errors import (
    DegeneratePieceError,
    InconsistentFunctionError,
    InstanceError,
    NotPositiveDefiniteError,
    NumericalDegeneracyError,
    ShapeError,
    TreeQPError,
)
from .pwq import ConjugateFn, IndicatorCost, PiecewiseQuadratic, QuadraticPiece
from .solver import Solution, SolveOptions, forward_pass, solve_path, solve_tree
from .tree import TreeInstance, topological_order, validate

__version__ = "0.1.0"

__all__ = [
    "ConjugateFn", "DegeneratePieceError", "InconsistentFunctionError", "IndicatorCost", "InstanceError",
    "NotPositiveDefiniteError", "NumericalDegeneracyError", "PiecewiseQuadratic", "QuadraticPiece",
    "ShapeError", "Solution", "SolveOptions", "TreeInstance", "TreeQPError", "forward_pass", "kernels",
    "solve_path", "solve_tree", "topological_order", "validate",
]
