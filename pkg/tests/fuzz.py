"""Random instances and functions shared by the test modules."""

import math

import numpy as np

from treeqp.pwq import IndicatorCost, PiecewiseQuadratic
from treeqp.tree import TreeInstance


def lower_envelope(quad, lin, const):
    """Exact piecewise representation of ``min_k (quad_k t^2 + lin_k t + const_k)``."""
    quad, lin, const = map(np.asarray, (quad, lin, const))
    K = len(quad)
    cuts = []
    for i in range(K):
        for j in range(i + 1, K):
            A, B, C = quad[i] - quad[j], lin[i] - lin[j], const[i] - const[j]
            if A == 0.0:
                if B != 0.0:
                    cuts.append(-C / B)
                continue
            disc = B * B - 4 * A * C
            if disc > 0:
                sq = math.sqrt(disc)
                cuts.extend([(-B - sq) / (2 * A), (-B + sq) / (2 * A)])
    cuts = np.unique(np.array(cuts, dtype=float))
    edges = np.concatenate(([-np.inf], cuts, [np.inf]))
    mids = np.empty(len(edges) - 1)
    for k in range(len(mids)):
        lo, hi = edges[k], edges[k + 1]
        mids[k] = hi - 1.0 if lo == -np.inf else (lo + 1.0 if hi == np.inf else 0.5 * (lo + hi))
    if len(cuts) == 0:
        mids = np.array([0.0])
    vals = (quad[None, :] * mids[:, None] + lin[None, :]) * mids[:, None] + const[None, :]
    idx = vals.argmin(axis=1)
    keep = [0] + [k for k in range(1, len(idx)) if idx[k] != idx[k - 1]]
    breaks = [-np.inf] + [edges[k] for k in keep[1:]] + [np.inf]
    sel = idx[keep]
    return PiecewiseQuadratic(breaks, quad[sel], lin[sel], const[sel])


def random_consistent(rng, max_pieces=20, min_pieces=1):
    """A consistent function with ``min_pieces..max_pieces`` pieces (rejection sampling)."""
    while True:
        k = int(rng.integers(1, 9))
        a = rng.uniform(0.1, 2.0, k)
        v = rng.uniform(-5.0, 5.0, k)
        m = rng.uniform(-5.0, 5.0, k)
        f = lower_envelope(a, -2 * a * v, a * v * v + m)
        if min_pieces <= f.n_pieces <= max_pieces:
            return f


def random_indicator_cost(rng, max_pieces=20, min_pieces=1):
    return IndicatorCost(random_consistent(rng, max_pieces, min_pieces), float(rng.uniform(1e-3, 5.0)), True)


def random_tree_instance(rng, n, lam=None, mixed_lambda=False, strong=False):
    """Random tree with uniform attachment; ``strong`` uses signed, weakly dominant couplings."""
    edges = []
    rad = np.zeros(n)
    for i in range(1, n):
        p = int(rng.integers(0, i))
        q = float(rng.uniform(-1, 1) if strong else -rng.uniform(0, 1))
        if q == 0.0:
            q = -0.5
        edges.append((p, i, q))
        rad[p] += abs(q)
        rad[i] += abs(q)
    if strong:
        diag = 0.2 + rad * rng.uniform(0.55, 1.2, n)
    else:
        diag = 1.0 + rad
    c = rng.uniform(-10, 10, n)
    if lam is not None:
        lv = np.full(n, float(lam))
    elif mixed_lambda:
        lv = rng.uniform(-2.0, 8.0, n)
    else:
        lv = rng.uniform(0.1, 8.0, n)
    return TreeInstance(n, diag, edges, c, lv)


def is_pd(inst, tol=1e-6):
    return float(np.linalg.eigvalsh(inst.dense_q()).min()) > tol


def random_pd_tree(rng, n, **kw):
    while True:
        inst = random_tree_instance(rng, n, **kw)
        if is_pd(inst):
            return inst
