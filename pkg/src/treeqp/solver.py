"""Parametric forward/backward solvers for tree- and path-structured problems."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InconsistentFunctionError, NotPositiveDefiniteError, ShapeError
from .pwq import ConjugateFn, IndicatorCost, PiecewiseQuadratic, clip
from .tree import (
    RootedOrder,
    TreeInstance,
    lambda_min_lower_bound,
    normalize,
    preprocess_lambda,
    topological_order,
    validate,
)


@dataclass
class NodeState:
    cost: IndicatorCost
    conj: ConjugateFn | None
    pieces: int


@dataclass
class SolveOptions:
    """``clip=None`` clips whenever a positive eigenvalue bound is available."""

    clip: bool | None = None
    clip_M: float | None = None
    root: int | None = None
    normalize: bool = False
    eig_tol: float = 1e-6


@dataclass
class Solution:
    objective: float
    x: np.ndarray
    z: np.ndarray
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "objective": float(self.objective),
            "x": [float(v) for v in self.x],
            "z": [int(v) for v in self.z],
            "stats": {
                "pieces_mean": float(self.stats.get("pieces_mean", 0.0)),
                "pieces_max": int(self.stats.get("pieces_max", 0)),
                "time_ms": float(self.stats.get("time_ms", 0.0)),
                "clipped": bool(self.stats.get("clipped", False)),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        return cls(float(data["objective"]), np.asarray(data["x"], dtype=float),
                   np.asarray(data["z"], dtype=int), dict(data.get("stats", {})))

    @classmethod
    def load(cls, path) -> "Solution":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def evaluate_objective(inst: TreeInstance, x, z) -> float:
    """Objective at ``(x, z)``; raises ``ValueError`` if ``x_i != 0`` while ``z_i = 0``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    if np.any((x != 0.0) & (z == 0)):
        raise ValueError("infeasible point: nonzero x with z = 0")
    return inst.objective(x, z)


def _node_state(inst, order, states, u, active, clip_M, with_conj):
    parents = order.parents[u]
    parts = [states[v].conj.arrays() for v in parents]
    scales = [-order.child_q[v] for v in parents]
    breaks, quad, lin, const = kernels.node_base(parts, scales, 0.5 * inst.diag[u], float(inst.c[u]))
    if not np.all(quad > 0.0):
        k = int(np.argmin(quad))
        raise NotPositiveDefiniteError(f"piece {k} has quadratic coefficient {quad[k]:.6g}", node=u)
    base = PiecewiseQuadratic(breaks, quad, lin, const)
    if clip_M is not None:
        base = clip(base, clip_M)
    has_ind = bool(active[u])
    lam = float(inst.lam[u]) if has_ind else 0.0
    cost = IndicatorCost(base, lam, has_ind)
    conj = None
    if with_conj:
        try:
            # an unclipped base is the minimum of its pieces on the whole line
            conj = ConjugateFn(*kernels.conjugate(*base.arrays(), lam, has_ind,
                                                  envelope=clip_M is None))
        except InconsistentFunctionError as exc:
            raise InconsistentFunctionError(str(exc), node=u) from None
    return NodeState(cost, conj, base.n_pieces)


def forward_pass(inst: TreeInstance, order: RootedOrder, clip_M: float | None = None,
                 active=None) -> list[NodeState]:
    """Parametric costs (and conjugates, except at the root) for every node, indexed by node id.

    ``active`` marks nodes that keep their indicator; by default those with ``lam > 0``.
    """
    if active is None:
        active, _ = preprocess_lambda(inst)
    states: list[NodeState | None] = [None] * inst.n
    root = order.root
    for u in order.order:
        states[u] = _node_state(inst, order, states, u, active, clip_M, u != root)
    return states


def _clip_bound(inst, order, opts):
    if opts.clip is False:
        return None
    if opts.clip_M is not None:
        return float(opts.clip_M)
    bound = lambda_min_lower_bound(inst, opts.eig_tol, order)
    if bound <= 0.0:
        return None
    norm = float(np.linalg.norm(inst.c))
    if norm == 0.0:
        # x = 0 is optimal; any positive box keeps it
        return 1.0
    return norm / bound


def _backward(inst, order, states, active):
    x = np.zeros(inst.n)
    root = order.root
    base = states[root].cost.base
    t, value = kernels.minimize(*base.arrays(), states[root].cost.lam, bool(active[root]), 0.0)
    x[root] = t
    stack = list(reversed(order.parents[root]))
    while stack:
        u = stack.pop()
        w = order.child[u]
        cost = states[u].cost
        t, _ = kernels.minimize(*cost.base.arrays(), cost.lam, cost.has_indicator,
                                order.child_q[u] * x[w])
        x[u] = t
        stack.extend(reversed(order.parents[u]))
    return x, value


def _solve(inst: TreeInstance, opts: SolveOptions, path_only: bool) -> Solution:
    validate(inst)
    if path_only and not inst.is_path():
        raise ShapeError("instance is not a path")
    t0 = time.perf_counter()
    work, scale = (normalize(inst) if opts.normalize else (inst, None))
    active, const = preprocess_lambda(work)
    order = topological_order(work, opts.root)
    clip_M = _clip_bound(work, order, opts)
    if path_only:
        states = _forward_path(work, order, clip_M, active)
    else:
        states = forward_pass(work, order, clip_M, active)
    x, value = _backward(work, order, states, active)
    elapsed = (time.perf_counter() - t0) * 1e3
    if scale is not None:
        x = x / scale
    z = ((x != 0.0) | ~active).astype(int)
    counts = np.array([s.pieces for s in states])
    stats = {
        "pieces_mean": float(counts.mean()),
        "pieces_max": int(counts.max()),
        "time_ms": elapsed,
        "clipped": clip_M is not None,
    }
    return Solution(value + const, x, z, stats)


def _forward_path(inst, order, clip_M, active):
    # Walk each arm of the path towards the root; every non-root node has at
    # most one parent, so the conjugate sum is a single rescaling.
    states: list[NodeState | None] = [None] * inst.n
    root = order.root
    for u in order.order:
        if len(order.parents[u]) > 1 and u != root:
            raise ShapeError(f"node {u} has {len(order.parents[u])} parents")
        states[u] = _node_state(inst, order, states, u, active, clip_M, u != root)
    return states


def solve_tree(inst: TreeInstance, options: SolveOptions | None = None, **kw) -> Solution:
    """Solve a tree instance exactly by the parametric recursion."""
    opts = options if options is not None else SolveOptions(**kw)
    return _solve(inst, opts, path_only=False)


def solve_path(inst: TreeInstance, options: SolveOptions | None = None, **kw) -> Solution:
    """Path specialization of :func:`solve_tree`; raises :class:`ShapeError` on other shapes."""
    opts = options if options is not None else SolveOptions(**kw)
    return _solve(inst, opts, path_only=True)


def total_pieces(states: list[NodeState]) -> int:
    return int(sum(s.pieces for s in states))


def is_feasible(x, z) -> bool:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    return bool(np.all((z == 0) | (z == 1)) and not np.any((x != 0.0) & (z == 0))
                and np.all(np.isfinite(x)) and not math.isnan(float(x.sum())))
