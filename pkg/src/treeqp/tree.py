"""Tree-structured problem instances.

An instance describes ``min 0.5 x'Qx + c'x + lam'z  s.t.  x_i (1 - z_i) = 0``
where the off-diagonal support of ``Q`` is a tree on nodes ``0..n-1``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceError

FILE_FIELDS = ("n", "diag", "edges", "c", "lambda")
#: optional provenance record written by the generators
META_FIELD = "generator"


@dataclass(eq=False)
class TreeInstance:
    n: int
    diag: np.ndarray
    edges: list[tuple[int, int, float]]
    c: np.ndarray
    lam: np.ndarray
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        self.n = int(self.n)
        self.diag = np.asarray(self.diag, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.edges = [(int(u), int(v), float(q)) for u, v, q in self.edges]

    def __eq__(self, other):
        if not isinstance(other, TreeInstance):
            return NotImplemented
        return (self.n == other.n and self.edges == other.edges
                and all(np.array_equal(a, b) for a, b in ((self.diag, other.diag), (self.c, other.c),
                                                            (self.lam, other.lam))))

    def neighbors(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, q in self.edges:
            adj[u].append((v, q))
            adj[v].append((u, q))
        for row in adj:
            row.sort()
        return adj

    def dense_q(self) -> np.ndarray:
        Q = np.diag(self.diag.copy())
        for u, v, q in self.edges:
            Q[u, v] = Q[v, u] = q
        return Q

    def objective(self, x, z) -> float:
        """Problem objective ``0.5 x'Qx + c'x + lam'z`` (no feasibility check)."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        val = 0.5 * float(np.dot(self.diag, x * x)) + float(np.dot(self.c, x)) + float(np.dot(self.lam, z))
        for u, v, q in self.edges:
            val += q * x[u] * x[v]
        return val

    def is_path(self) -> bool:
        if self.n <= 2:
            return True
        deg = np.zeros(self.n, dtype=int)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return int(deg.max()) <= 2

    # --- file format -----------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        if self.meta is not None:
            out[META_FIELD] = self.meta
        out["n"] = self.n
        out["diag"] = self.diag.tolist()
        out["edges"] = [{"u": u, "v": v, "q": q} for u, v, q in self.edges]
        out["c"] = self.c.tolist()
        out["lambda"] = self.lam.tolist()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "TreeInstance":
        if not isinstance(data, dict):
            raise InstanceError("instance must be a JSON object")
        unknown = sorted(set(data) - set(FILE_FIELDS) - {META_FIELD})
        if unknown:
            raise InstanceError(f"unknown field(s): {', '.join(unknown)}")
        for key in ("n", "edges", "c", "lambda"):
            if key not in data:
                raise InstanceError(f"missing field: {key}")
        n = data["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise InstanceError("field 'n': must be a positive integer")
        diag = data.get("diag", [1.0] * n)
        for key, arr in (("diag", diag), ("c", data["c"]), ("lambda", data["lambda"])):
            if not isinstance(arr, list) or len(arr) != n:
                raise InstanceError(f"field '{key}': expected a list of {n} numbers")
            for i, x in enumerate(arr):
                if not isinstance(x, (int, float)) or isinstance(x, bool):
                    raise InstanceError(f"field '{key}[{i}]': not a number")
        edges = []
        if not isinstance(data["edges"], list):
            raise InstanceError("field 'edges': expected a list")
        for i, e in enumerate(data["edges"]):
            if not isinstance(e, dict) or set(e) != {"u", "v", "q"}:
                raise InstanceError(f"field 'edges[{i}]': expected an object with keys u, v, q")
            if not all(isinstance(e[k], int) and not isinstance(e[k], bool) for k in ("u", "v")):
                raise InstanceError(f"field 'edges[{i}]': u and v must be integers")
            if not isinstance(e["q"], (int, float)) or isinstance(e["q"], bool):
                raise InstanceError(f"field 'edges[{i}].q': not a number")
            edges.append((e["u"], e["v"], float(e["q"])))
        return cls(n, diag, edges, data["c"], data["lambda"], meta=data.get(META_FIELD))

    @classmethod
    def loads(cls, text: str) -> "TreeInstance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "TreeInstance":
        with open(path) as fh:
            return cls.loads(fh.read())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


@dataclass
class RootedOrder:
    """Topological labelling: ``order[k]`` is the node with label ``k``; the root is last.

    ``child[u]`` is ``-1`` at the root, ``child_q[u]`` is ``Q[u, child(u)]`` and
    ``parents[u]`` lists the remaining neighbours in ascending id.
    """

    order: list[int]
    child: list[int]
    child_q: list[float]
    parents: list[list[int]]

    @property
    def root(self) -> int:
        return self.order[-1]

    def label(self) -> list[int]:
        lab = [0] * len(self.order)
        for k, u in enumerate(self.order):
            lab[u] = k
        return lab


def validate(inst: TreeInstance) -> None:
    """Raise :class:`InstanceError` unless the instance is a valid tree problem."""
    n = inst.n
    if n < 1:
        raise InstanceError("n must be positive")
    for name, arr in (("diag", inst.diag), ("c", inst.c), ("lambda", inst.lam)):
        if arr.shape != (n,):
            raise InstanceError(f"{name} must have length {n}")
        if not np.all(np.isfinite(arr)):
            raise InstanceError(f"{name} has non-finite entries")
    bad = np.flatnonzero(~(inst.diag > 0))
    if len(bad):
        raise InstanceError(f"nonpositive diagonal at node {int(bad[0])}")
    seen = set()
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v, q in inst.edges:
        if not (0 <= u < n and 0 <= v < n):
            raise InstanceError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
        if u == v:
            raise InstanceError(f"self-loop at node {u}")
        if not math.isfinite(q) or q == 0.0:
            raise InstanceError(f"edge ({u}, {v}) has weight {q}; weights must be finite and nonzero")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise InstanceError(f"duplicate edge ({u}, {v})")
        seen.add(key)
        ru, rv = find(u), find(v)
        if ru == rv:
            raise InstanceError(f"cycle detected through edge ({u}, {v})")
        parent[ru] = rv
    if len(inst.edges) != n - 1:
        raise InstanceError(f"graph is disconnected: {len(inst.edges)} edges for {n} nodes")


def topological_order(inst: TreeInstance, root: int | None = None) -> RootedOrder:
    """Label nodes so that every node precedes its child; ``root`` defaults to ``n - 1``."""
    n = inst.n
    r = n - 1 if root is None else int(root)
    if not 0 <= r < n:
        raise InstanceError(f"root {r} outside 0..{n - 1}")
    adj = inst.neighbors()
    child = [-1] * n
    child_q = [0.0] * n
    visited = [False] * n
    visited[r] = True
    bfs = [r]
    queue = deque([r])
    while queue:
        u = queue.popleft()
        for v, q in adj[u]:
            if not visited[v]:
                visited[v] = True
                child[v] = u
                child_q[v] = q
                bfs.append(v)
                queue.append(v)
    parents = [[v for v, _ in adj[u] if v != child[u]] for u in range(n)]
    return RootedOrder(bfs[::-1], child, child_q, parents)


def normalize(inst: TreeInstance) -> tuple[TreeInstance, np.ndarray]:
    """Rescale to a unit diagonal; returns the instance and ``sqrt(diag)``.

    A solution of the scaled problem maps back via ``x = x_scaled / scale``.
    """
    scale = np.sqrt(inst.diag)
    edges = [(u, v, q / (scale[u] * scale[v])) for u, v, q in inst.edges]
    out = TreeInstance(inst.n, np.ones(inst.n), edges, inst.c / scale, inst.lam.copy(), meta=inst.meta)
    return out, scale


def preprocess_lambda(inst: TreeInstance) -> tuple[np.ndarray, float]:
    """Nodes with ``lam <= 0`` always take ``z = 1``.

    Returns a boolean mask of indicator-carrying nodes and the constant
    ``sum(lam[lam <= 0])`` that those nodes contribute to the objective.
    """
    active = inst.lam > 0.0
    return active, float(inst.lam[~active].sum())


def _negative_pivots(inst: TreeInstance, order: RootedOrder, sigma: float) -> int:
    """Number of nonpositive pivots of ``Q - sigma I`` eliminated leaves first (no fill-in)."""
    d = (inst.diag - sigma).tolist()
    count = 0
    for u in order.order:
        piv = d[u]
        if piv <= 0.0:
            count += 1
            if piv == 0.0:
                piv = -1e-300
        w = order.child[u]
        if w >= 0:
            q = order.child_q[u]
            d[w] -= q * q / piv
    return count


def lambda_min_lower_bound(inst: TreeInstance, tol: float = 1e-6, order: RootedOrder | None = None) -> float:
    """Positive lower bound on the smallest eigenvalue of ``Q`` (0 if none is found).

    Gershgorin first; when that is not positive, bisection on the inertia of
    ``Q - sigma I`` to relative accuracy ``tol``.
    """
    radius = np.zeros(inst.n)
    for u, v, q in inst.edges:
        radius[u] += abs(q)
        radius[v] += abs(q)
    gersh = float(np.min(inst.diag - radius))
    if gersh > 0.0:
        return gersh
    if order is None:
        order = topological_order(inst)
    if _negative_pivots(inst, order, 0.0) > 0:
        return 0.0
    lo, hi = 0.0, float(np.min(inst.diag))
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _negative_pivots(inst, order, mid) == 0:
            lo = mid
        else:
            hi = mid
    return lo
