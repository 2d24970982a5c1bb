"""Robust Gaussian hidden Markov model inference.

The model has hidden states ``x_1..x_T`` following a Gaussian random walk and,
at each step ``t``, ``K_t`` observations ``y = x_t + noise + outlier``.
Outliers are absorbed by variables ``w`` that cost ``lambda_w`` when nonzero,
and states pay ``gamma_x`` when nonzero::

    sum_{t,k} (y_kt - x_t - w_kt)^2 / nu2 + x_1^2 / sigma2_initial
      + sum_{t>1} (x_t - x_{t-1})^2 / sigma2 + lambda_w * #{w != 0} + gamma_x * #{x != 0}

Expanding the squares gives a tree instance: the states form a path and each
observation's ``w`` is a leaf on its state.  Node ids per step are the ``w``
leaves followed by ``x_t``, so the last state is the highest id (the root).
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InstanceError
from .pwq import ConjugateFn, IndicatorCost, PiecewiseQuadratic, add_quadratic, clip
from .pwq import QuadraticPiece
from .solver import SolveOptions, solve_tree
from .tree import TreeInstance


@dataclass(frozen=True)
class GhmmParams:
    sigma2: float = 2.0
    nu2: float = 1.0
    lambda_w: float = 100.0
    gamma_x: float = 400.0
    K: int = 10
    sigma2_initial: float | None = None

    def __post_init__(self):
        for name in ("sigma2", "nu2", "lambda_w", "gamma_x"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma2_initial is not None and not self.sigma2_initial > 0:
            raise ValueError("sigma2_initial must be positive")
        if int(self.K) < 1:
            raise ValueError("K must be at least 1")

    @property
    def s1(self) -> float:
        return self.sigma2 if self.sigma2_initial is None else self.sigma2_initial


@dataclass
class GhmmInstanceMap:
    x_ids: list[int]
    w_ids: list[list[int]]
    constant: float


@dataclass
class GhmmSolution:
    x: np.ndarray
    w: list[np.ndarray]
    z: list[np.ndarray]
    s: np.ndarray
    objective_miqp: float
    objective_model: float

    @property
    def outliers(self) -> list[tuple[int, int]]:
        return [(t, k) for t, zt in enumerate(self.z) for k in np.flatnonzero(zt)]

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "outliers": [[int(t), int(k)] for t, k in self.outliers],
            "s": [int(v) for v in self.s],
            "objective_miqp": float(self.objective_miqp),
            "objective_model": float(self.objective_model),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def windows(y, K: int) -> list[np.ndarray]:
    """Split a flat observation stream into consecutive windows of ``K`` (the last may be shorter)."""
    y = np.asarray(y, dtype=float).ravel()
    return [y[i:i + K] for i in range(0, len(y), K)]


def _as_windows(y, p: GhmmParams) -> list[np.ndarray]:
    if len(y) and np.ndim(y[0]) > 0:
        ws = [np.asarray(w, dtype=float).ravel() for w in y]
    else:
        ws = windows(y, p.K)
    if not ws:
        raise InstanceError("no observations")
    for t, w in enumerate(ws):
        if len(w) == 0:
            raise InstanceError(f"window {t} is empty")
        if not np.all(np.isfinite(w)):
            raise InstanceError(f"window {t} has non-finite observations")
    return ws


def read_observations(path, header: bool | None = None) -> np.ndarray:
    """One value per line (first column); ``header=None`` skips a non-numeric first row."""
    vals = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            if i == 0 and header is not False:
                try:
                    float(row[0])
                except ValueError:
                    continue
                if header:
                    continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                raise InstanceError(f"line {i + 1}: not a number: {row[0]!r}") from None
    if not vals:
        raise InstanceError("observation file is empty")
    return np.array(vals)


def build_instance(y, p: GhmmParams) -> tuple[TreeInstance, GhmmInstanceMap]:
    ws = _as_windows(y, p)
    T = len(ws)
    inv_nu = 1.0 / p.nu2
    diag, c, lam = [], [], []
    edges = []
    x_ids, w_ids = [], []
    constant = 0.0
    for t, obs in enumerate(ws):
        ids = []
        for yk in obs:
            ids.append(len(diag))
            diag.append(2.0 * inv_nu)
            c.append(-2.0 * yk * inv_nu)
            lam.append(p.lambda_w)
            constant += yk * yk * inv_nu
        xt = len(diag)
        d = 2.0 * len(obs) * inv_nu + 2.0 / (p.s1 if t == 0 else p.sigma2)
        if t < T - 1:
            d += 2.0 / p.sigma2
        diag.append(d)
        c.append(-2.0 * float(obs.sum()) * inv_nu)
        lam.append(p.gamma_x)
        edges.extend((w, xt, 2.0 * inv_nu) for w in ids)
        if t > 0:
            edges.append((x_ids[-1], xt, -2.0 / p.sigma2))
        x_ids.append(xt)
        w_ids.append(ids)
    inst = TreeInstance(len(diag), diag, edges, c, lam)
    return inst, GhmmInstanceMap(x_ids, w_ids, constant)


def model_objective(y, p: GhmmParams, x, w) -> float:
    """The model objective evaluated directly (penalties charged on nonzero ``x`` / ``w``)."""
    ws = _as_windows(y, p)
    val = 0.0
    for t, obs in enumerate(ws):
        wt = np.asarray(w[t], dtype=float)
        val += float(np.sum((obs - x[t] - wt) ** 2)) / p.nu2
        val += p.lambda_w * int(np.count_nonzero(wt))
        val += p.gamma_x * int(x[t] != 0.0)
        if t == 0:
            val += x[0] ** 2 / p.s1
        else:
            val += (x[t] - x[t - 1]) ** 2 / p.sigma2
    return val


def solve_batch(y, p: GhmmParams, options: SolveOptions | None = None) -> GhmmSolution:
    inst, mp = build_instance(y, p)
    sol = solve_tree(inst, options)
    x = sol.x[mp.x_ids]
    w = [sol.x[ids] for ids in mp.w_ids]
    z = [(wt != 0.0).astype(int) for wt in w]
    s = (x != 0.0).astype(int)
    return GhmmSolution(x, w, z, s, sol.objective, sol.objective + mp.constant)


# --- online -----------------------------------------------------------------

@dataclass
class OnlineState:
    """Rolling state of the online smoother.

    ``last_cost`` is the parametric cost of the newest state, kept before
    conjugation because the next step still adds its transition term to the
    diagonal.  ``recent`` holds the final costs of the preceding states, newest
    last, up to ``history`` of them.
    """

    params: GhmmParams
    history: int = 16
    clip_M: float | None = None
    horizon: int = 0
    last_cost: IndicatorCost | None = None
    recent: deque = field(default_factory=deque)
    constant: float = 0.0


def online_init(p: GhmmParams, history: int = 16, clip_M: float | None = None) -> OnlineState:
    """Empty state.  ``clip_M``, when given, must bound every state and outlier value."""
    if history < 0:
        raise ValueError("history must be nonnegative")
    return OnlineState(p, history, clip_M, recent=deque(maxlen=history or None))


def _leaf_conj(p: GhmmParams, yk: float):
    inv_nu = 1.0 / p.nu2
    br = np.array([-np.inf, np.inf])
    return kernels.conjugate(br, np.array([inv_nu]), np.array([-2.0 * yk * inv_nu]), np.zeros(1),
                             p.lambda_w, True)


def online_step(st: OnlineState, window, S: int = 5) -> tuple[np.ndarray, float]:
    """Absorb one window of observations.

    Returns the newest ``S`` states (oldest first; fewer if the history is
    shorter) and the optimal value at the new horizon.
    """
    p = st.params
    obs = np.asarray(window, dtype=float).ravel()
    if len(obs) == 0:
        raise InstanceError("window is empty")
    inv_nu = 1.0 / p.nu2
    parts, scales = [], []
    if st.last_cost is not None:
        ext = add_quadratic(st.last_cost.base, QuadraticPiece(1.0 / p.sigma2, 0.0, 0.0))
        final = IndicatorCost(ext, st.last_cost.lam, st.last_cost.has_indicator)
        if st.history:
            st.recent.append(final)
        parts.append(kernels.conjugate(*ext.arrays(), final.lam, final.has_indicator,
                                       envelope=st.clip_M is None))
        scales.append(2.0 / p.sigma2)
    for yk in obs:
        parts.append(_leaf_conj(p, float(yk)))
        scales.append(-2.0 * inv_nu)
    half = len(obs) * inv_nu + 1.0 / (p.s1 if st.horizon == 0 else p.sigma2)
    base = PiecewiseQuadratic(*kernels.node_base(parts, scales, half, -2.0 * float(obs.sum()) * inv_nu))
    if st.clip_M is not None:
        base = clip(base, st.clip_M)
    st.last_cost = IndicatorCost(base, p.gamma_x, True)
    st.horizon += 1
    st.constant += float(np.dot(obs, obs)) * inv_nu

    xt, value = kernels.minimize(*base.arrays(), p.gamma_x, True, 0.0)
    out = [xt]
    q = -2.0 / p.sigma2
    for cost in reversed(st.recent):
        if len(out) >= S:
            break
        xt, _ = kernels.minimize(*cost.base.arrays(), cost.lam, cost.has_indicator, q * xt)
        out.append(xt)
    return np.array(out[::-1]), value


def online_run(y, p: GhmmParams, S: int = 5, history: int | None = None, clip_M: float | None = None,
               timer=None):
    """Feed a stream window by window; yields ``(suffix, objective)`` per step."""
    st = online_init(p, history if history is not None else max(S, 1), clip_M)
    for obs in _as_windows(y, p):
        if timer is not None:
            with timer:
                res = online_step(st, obs, S)
        else:
            res = online_step(st, obs, S)
        yield res


__all__ = [
    "ConjugateFn", "GhmmInstanceMap", "GhmmParams", "GhmmSolution", "OnlineState", "build_instance",
    "model_objective", "online_init", "online_run", "online_step", "read_observations",
    "solve_batch", "windows",
]
