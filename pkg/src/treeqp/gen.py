"""Synthetic instance families.

Every generator draws from ``numpy.random.default_rng(seed)`` (the PCG64 bit
generator), so a seed reproduces the same instance on any platform.  Shared
data law:

* off-diagonal ``Q_ij ~ U[-1, 0)``, an exact ``0`` draw is redrawn;
* ``Q_ii = 1 + sum_j |Q_ij|`` (strict diagonal dominance, so ``lambda_min >= 1``);
* ``c_i ~ U(-10, 10)``;
* ``lambda_i = lambda_bar`` for all ``i``.

Random trees attach node ``i`` to a uniformly chosen node among ``0..i-1``.
"""

from __future__ import annotations

import numpy as np

from .tree import TreeInstance

DEFAULT_LAMBDA = 7.5
C_RANGE = (-10.0, 10.0)


def _meta(kind: str, seed: int, **params) -> dict:
    return {"kind": kind, "seed": int(seed), "prng": "numpy PCG64 via default_rng(seed)", **params}


def _coupling(rng: np.random.Generator) -> float:
    while True:
        q = -float(rng.random())  # in (-1, 0]
        if q != 0.0:
            return q


def _assemble(n, pairs, rng, lambda_bar, c_range, meta) -> TreeInstance:
    edges = [(u, v, _coupling(rng)) for u, v in pairs]
    diag = np.ones(n)
    for u, v, q in edges:
        diag[u] += abs(q)
        diag[v] += abs(q)
    lo, hi = c_range
    c = rng.uniform(lo, hi, n)
    lam = np.full(n, float(lambda_bar))
    return TreeInstance(n, diag, edges, c, lam, meta=meta)


def random_tree(n: int, seed: int, lambda_bar: float = DEFAULT_LAMBDA,
                c_range=C_RANGE) -> TreeInstance:
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    pairs = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    return _assemble(n, pairs, rng, lambda_bar, c_range,
                     _meta("random-tree", seed, n=n, lambda_bar=lambda_bar))


def random_path(n: int, seed: int, lambda_bar: float = DEFAULT_LAMBDA,
                c_range=C_RANGE) -> TreeInstance:
    """Path ``0 - 1 - ... - n-1``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    pairs = [(i, i + 1) for i in range(n - 1)]
    return _assemble(n, pairs, rng, lambda_bar, c_range,
                     _meta("path", seed, n=n, lambda_bar=lambda_bar))


def extended_star(branches: int, length: int, seed: int, lambda_bar: float = DEFAULT_LAMBDA,
                  c_range=C_RANGE) -> TreeInstance:
    """``branches`` paths of ``length`` nodes hanging off a single hub.

    Branch ``b`` occupies ids ``b*length .. b*length + length - 1`` ordered from
    its leaf towards the hub; the hub has id ``branches * length``.
    """
    if branches < 1 or length < 1:
        raise ValueError("branches and length must be positive")
    rng = np.random.default_rng(seed)
    hub = branches * length
    pairs = []
    for b in range(branches):
        first = b * length
        pairs.extend((first + k, first + k + 1) for k in range(length - 1))
        pairs.append((first + length - 1, hub))
    return _assemble(hub + 1, pairs, rng, lambda_bar, c_range,
                     _meta("extended-star", seed, branches=branches, length=length,
                           lambda_bar=lambda_bar))


def generate(kind: str, seed: int, n: int | None = None, branches: int | None = None,
             length: int | None = None, lambda_bar: float = DEFAULT_LAMBDA) -> TreeInstance:
    if kind == "random-tree":
        return random_tree(n, seed, lambda_bar)
    if kind == "path":
        return random_path(n, seed, lambda_bar)
    if kind == "extended-star":
        return extended_star(branches, length, seed, lambda_bar)
    raise ValueError(f"unknown kind {kind!r}")
