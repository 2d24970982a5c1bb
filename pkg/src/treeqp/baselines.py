"""Independent reference solvers.

None of these consult the parametric solver; they exist to check it.

* :func:`brute_force_solve` enumerates every support, solving the restricted
  system by leaf-to-root elimination (trees factor without fill-in).
* :func:`parametric_oracle` evaluates a node's parametric cost by enumerating
  supports on its subtree and forming the Schur-complement quadratic.
* :func:`direct_dp_path` is the classical window DP for path graphs.
* :func:`grid_conjugate` approximates a conjugate by maximizing over an
  ``alpha`` grid.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InstanceError, ShapeError
from .pwq import IndicatorCost
from .solver import Solution
from .tree import RootedOrder, TreeInstance, topological_order, validate

BRUTE_MAX_N = 25
ORACLE_MAX_SUBTREE = 20
_CHUNK = 1 << 16


def _mask_bits(masks: np.ndarray, n: int) -> np.ndarray:
    """Boolean array ``(n, len(masks))`` with row ``i`` = bit ``i`` of each mask."""
    return ((masks[None, :] >> np.arange(n, dtype=np.int64)[:, None]) & 1).astype(bool)


def _support_energy(inst: TreeInstance, order: RootedOrder, bits: np.ndarray) -> np.ndarray:
    """``c_J' Q_JJ^{-1} c_J`` for each column of ``bits`` (support indicator per node)."""
    m = bits.shape[1]
    d = np.repeat(inst.diag[:, None], m, axis=1)
    r = np.repeat(inst.c[:, None], m, axis=1)
    energy = np.zeros(m)
    for u in order.order:
        on = bits[u]
        du = d[u]
        ru = np.where(on, r[u], 0.0)
        ratio = np.where(on, ru / du, 0.0)
        energy += ratio * ru
        w = order.child[u]
        if w >= 0:
            q = order.child_q[u]
            both = on & bits[w]
            d[w] = np.where(both, d[w] - q * q / du, d[w])
            r[w] = np.where(both, r[w] - q * ratio, r[w])
    return energy


def _restricted_solution(inst: TreeInstance, order: RootedOrder, support: np.ndarray) -> np.ndarray:
    """``x`` with ``x_J = -Q_JJ^{-1} c_J`` and zeros elsewhere."""
    d = inst.diag.copy()
    r = inst.c.copy()
    for u in order.order:
        w = order.child[u]
        if support[u] and w >= 0 and support[w]:
            q = order.child_q[u]
            r[w] -= q * r[u] / d[u]
            d[w] -= q * q / d[u]
    x = np.zeros(inst.n)
    for u in reversed(order.order):
        if not support[u]:
            continue
        w = order.child[u]
        val = r[u]
        if w >= 0 and support[w]:
            val -= order.child_q[u] * (-x[w])
        x[u] = -val / d[u]
    return x


def brute_force_solve(inst: TreeInstance) -> Solution:
    """Exact optimum by enumerating all ``2**n`` supports.

    Ties go to the smaller support, then to the lexicographically smaller ``z``.
    """
    validate(inst)
    n = inst.n
    if n > BRUTE_MAX_N:
        raise InstanceError(f"brute force limited to n <= {BRUTE_MAX_N}, got {n}")
    order = topological_order(inst)
    best_val = math.inf
    cands: list[tuple[float, int]] = []
    total = 1 << n
    for start in range(0, total, _CHUNK):
        masks = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        bits = _mask_bits(masks, n)
        vals = -0.5 * _support_energy(inst, order, bits) + inst.lam @ bits
        lo = float(vals.min())
        if lo < best_val:
            best_val = lo
            cands = [(v, m) for v, m in cands if v <= best_val + _tie(best_val)]
        keep = np.flatnonzero(vals <= best_val + _tie(best_val))
        cands.extend((float(vals[k]), int(masks[k])) for k in keep)
    cands = [(v, m) for v, m in cands if v <= best_val + _tie(best_val)]

    def key(item):
        mask = item[1]
        return (bin(mask).count("1"), [(mask >> i) & 1 for i in range(n)])

    val, mask = min(cands, key=key)
    z = np.array([(mask >> i) & 1 for i in range(n)], dtype=int)
    x = _restricted_solution(inst, order, z.astype(bool))
    return Solution(val, x, z, {"pieces_mean": 0.0, "pieces_max": 0, "time_ms": 0.0, "clipped": False})


def _tie(v: float) -> float:
    return 1e-12 * (1.0 + abs(v))


def subtree_nodes(order: RootedOrder, u: int) -> list[int]:
    """Nodes whose path to the root passes through ``u`` (``u`` excluded), in label order."""
    lab = order.label()
    out = []
    stack = list(order.parents[u])
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(order.parents[v])
    return sorted(out, key=lambda v: lab[v])


def parametric_pieces(inst: TreeInstance, order: RootedOrder, u: int, active=None) -> np.ndarray:
    """All candidate pieces ``(g1, g2, g3)`` of the parametric cost at ``u``, one per support.

    Nodes outside ``active`` carry no indicator: they are always in the support
    and contribute nothing to the constant.
    """
    if active is None:
        active = inst.lam > 0.0
    sub = subtree_nodes(order, u)
    if len(sub) + 1 > ORACLE_MAX_SUBTREE:
        raise InstanceError(f"subtree at node {u} has {len(sub) + 1} nodes (limit {ORACLE_MAX_SUBTREE})")
    free = [v for v in sub if active[v]]
    masks = np.arange(1 << len(free), dtype=np.int64)
    fbits = _mask_bits(masks, len(free))
    m = len(masks)
    on = {v: np.ones(m, dtype=bool) for v in sub}
    for i, v in enumerate(free):
        on[v] = fbits[i]
    d = {v: np.full(m, inst.diag[v]) for v in sub}
    r1 = {v: np.full(m, inst.c[v]) for v in sub}
    r2 = {v: np.full(m, order.child_q[v] if order.child[v] == u else 0.0) for v in sub}
    s11 = np.zeros(m)
    s12 = np.zeros(m)
    s22 = np.zeros(m)
    lam_sum = np.zeros(m)
    for v in sub:
        ov = on[v]
        dv = d[v]
        a1 = np.where(ov, r1[v] / dv, 0.0)
        a2 = np.where(ov, r2[v] / dv, 0.0)
        s11 += a1 * r1[v]
        s12 += a1 * r2[v]
        s22 += a2 * r2[v]
        if active[v]:
            lam_sum += np.where(ov, inst.lam[v], 0.0)
        w = order.child[v]
        if w != u:
            q = order.child_q[v]
            both = ov & on[w]
            d[w] = np.where(both, d[w] - q * q / dv, d[w])
            r1[w] = np.where(both, r1[w] - q * a1, r1[w])
            r2[w] = np.where(both, r2[w] - q * a2, r2[w])
    g1 = 0.5 * (inst.diag[u] - s22)
    g2 = inst.c[u] - s12
    g3 = -0.5 * s11 + lam_sum
    return np.stack([g1, g2, g3], axis=1)


def parametric_oracle(inst: TreeInstance, order: RootedOrder, u: int, alphas, active=None) -> np.ndarray:
    """Parametric cost at ``u`` (subtree optimum with ``x_u`` pinned) at each ``alpha``."""
    if active is None:
        active = inst.lam > 0.0
    pieces = parametric_pieces(inst, order, u, active)
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    vals = (pieces[:, 0][None, :] * a[:, None] + pieces[:, 1][None, :]) * a[:, None] + pieces[:, 2][None, :]
    out = vals.min(axis=1)
    if active[u]:
        out = out + inst.lam[u] * (a != 0.0)
    return out


def path_sequence(inst: TreeInstance) -> list[int]:
    """Node ids along the path, starting from the endpoint with the smaller id."""
    validate(inst)
    if not inst.is_path():
        raise ShapeError("instance is not a path")
    if inst.n == 1:
        return [0]
    adj = inst.neighbors()
    start = min(u for u in range(inst.n) if len(adj[u]) == 1)
    seq = [start]
    prev = -1
    while len(seq) < inst.n:
        u = seq[-1]
        nxt = [v for v, _ in adj[u] if v != prev]
        prev = u
        seq.append(nxt[0])
    return seq


def window_costs(inst: TreeInstance, seq=None):
    """Yield, for each right end ``l`` along the path, ``q*`` of every window ``[k, l]``, ``k <= l``.

    The window cost is ``-c'Q^{-1}c / 2 + sum(lambda)`` over the window with
    every node in the support; each left endpoint carries its own LDL factor.
    """
    if seq is None:
        seq = path_sequence(inst)
    adj = {}
    for u, v, q in inst.edges:
        adj[(u, v)] = adj[(v, u)] = q
    diag = inst.diag[seq]
    c = inst.c[seq]
    lam = inst.lam[seq]
    d = np.empty(0)
    y = np.empty(0)
    energy = np.empty(0)
    lam_sum = np.empty(0)
    for l in range(len(seq)):
        if l > 0:
            q = adj[(seq[l - 1], seq[l])]
            m = q / d
            d = diag[l] - q * m
            y = c[l] - m * y
            energy = energy + y * y / d
            lam_sum = lam_sum + lam[l]
        d = np.append(d, diag[l])
        y = np.append(y, c[l])
        energy = np.append(energy, c[l] * c[l] / diag[l])
        lam_sum = np.append(lam_sum, lam[l])
        yield -0.5 * energy + lam_sum


def window_cost(inst: TreeInstance, k: int, l: int, seq=None) -> float:
    """``q*`` of the window ``[k, l]`` (positions along the path); ``0`` when ``k > l``."""
    if k > l:
        return 0.0
    for pos, costs in enumerate(window_costs(inst, seq)):
        if pos == l:
            return float(costs[k])
    raise IndexError("window end outside the path")


def _tridiag_solve(diag, off, rhs):
    n = len(diag)
    d = np.array(diag, dtype=float)
    r = np.array(rhs, dtype=float)
    for i in range(1, n):
        m = off[i - 1] / d[i - 1]
        d[i] -= m * off[i - 1]
        r[i] -= m * r[i - 1]
    x = np.zeros(n)
    x[-1] = r[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (r[i] - off[i] * x[i + 1]) / d[i]
    return x


def direct_dp_path(inst: TreeInstance) -> Solution:
    """Exact optimum of a path instance by the window recursion, ``O(n^2)`` time."""
    seq = path_sequence(inst)
    n = inst.n
    # F[j] is the optimum over the first j path positions
    F = np.zeros(n + 1)
    choice = np.empty(n, dtype=np.int64)
    for l, costs in enumerate(window_costs(inst, seq)):
        base = np.concatenate(([0.0], F[: l]))
        tot = costs + base
        k = int(np.argmin(tot))
        if F[l] <= tot[k]:
            F[l + 1] = F[l]
            choice[l] = -1
        else:
            F[l + 1] = tot[k]
            choice[l] = k
    adj = {}
    for u, v, q in inst.edges:
        adj[(u, v)] = adj[(v, u)] = q
    x = np.zeros(n)
    z = np.zeros(n, dtype=int)
    l = n - 1
    while l >= 0:
        k = int(choice[l])
        if k < 0:
            l -= 1
            continue
        nodes = seq[k: l + 1]
        off = [adj[(nodes[i], nodes[i + 1])] for i in range(len(nodes) - 1)]
        x[nodes] = _tridiag_solve(inst.diag[nodes], off, -inst.c[nodes])
        z[nodes] = 1
        l = k - 2
    return Solution(float(F[n]), x, z, {"pieces_mean": 0.0, "pieces_max": 0, "time_ms": 0.0, "clipped": False})


class GridConjugate:
    """``beta -> max over grid alpha (and alpha = 0) of alpha*beta - f(alpha)``.

    With ``exact=True`` (default) the grid maximum is found per piece: on each
    breakpoint interval the objective is concave in ``alpha``, so the best grid
    point is a neighbour of the clamped continuous maximizer.  ``exact=False``
    scans the whole grid.
    """

    def __init__(self, f: IndicatorCost, M: float, step: float, exact: bool = True):
        if not (M > 0 and step > 0):
            raise ValueError("M and step must be positive")
        self.f = f
        self.M = float(M)
        self.step = float(step)
        self.exact = exact
        self.count = int(math.floor(2.0 * self.M / self.step + 1e-9))
        self.f0 = float(f.base(0.0))
        lam = f.lam if f.has_indicator else 0.0
        self.lam = float(lam)
        base = f.base
        br = base.breaks
        lo = np.ceil((np.maximum(br[:-1], -self.M) + self.M) / self.step - 1e-9)
        hi = np.floor((np.minimum(br[1:], self.M) + self.M) / self.step + 1e-9)
        self.j_lo = np.clip(lo, 0, self.count)
        self.j_hi = np.clip(hi, 0, self.count)
        self.valid = self.j_lo <= self.j_hi

    def _grid(self, j):
        return -self.M + j * self.step

    def __call__(self, beta):
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        if self.exact:
            out = self._exact(b)
        else:
            out = self._dense(b)
        out = np.maximum(out, -self.f0)
        return float(out[0]) if np.ndim(beta) == 0 else out

    def _exact(self, b):
        base = self.f.base
        best = np.full(len(b), -np.inf)
        for k in np.flatnonzero(self.valid):
            a, bb, cc = base.quad[k], base.lin[k], base.const[k]
            cont = (b - bb) / (2.0 * a)
            jc = (cont + self.M) / self.step
            for j in (np.floor(jc), np.ceil(jc)):
                j = np.clip(j, self.j_lo[k], self.j_hi[k])
                t = self._grid(j)
                best = np.maximum(best, b * t - ((a * t + bb) * t + cc) - self.lam)
        return best

    def _dense(self, b):
        t = self._grid(np.arange(self.count + 1))
        ft = np.asarray(self.f.base(t)) + self.lam
        best = np.full(len(b), -np.inf)
        for i in range(0, len(b), 64):
            blk = b[i:i + 64]
            best[i:i + 64] = (blk[:, None] * t[None, :] - ft[None, :]).max(axis=1)
        return best


def grid_conjugate(f: IndicatorCost, M: float, step: float, exact: bool = True) -> GridConjugate:
    """Grid approximation of the conjugate of ``f`` on ``[-M, M]`` with spacing ``step``."""
    return GridConjugate(f, M, step, exact)
