"""Piecewise-quadratic functions of one variable and their conjugates.

A :class:`PiecewiseQuadratic` stores ``N`` pieces ``g1*t**2 + g2*t + g3`` over
breakpoints ``-inf = b_0 < b_1 < ... < b_N = +inf``.  The same container
holds two kinds of function:

* consistent costs, which equal the pointwise *minimum* of their pieces;
* conjugates (:class:`ConjugateFn`), which equal the pointwise *maximum*.

An :class:`IndicatorCost` adds ``lam * 1[t != 0]`` on top of a consistent base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _pykernels, kernels
from .errors import DegeneratePieceError, NumericalDegeneracyError

INF = math.inf

#: coefficient tolerance for "identical" adjacent pieces
COEF_RTOL = _pykernels.COEF_RTOL
#: continuity tolerance, scaled by ``1 + |value|``
CONT_RTOL = 1e-7


@dataclass(frozen=True)
class QuadraticPiece:
    gamma1: float
    gamma2: float
    gamma3: float

    def __call__(self, t):
        return (self.gamma1 * t + self.gamma2) * t + self.gamma3

    def __add__(self, other: "QuadraticPiece") -> "QuadraticPiece":
        return QuadraticPiece(self.gamma1 + other.gamma1, self.gamma2 + other.gamma2,
                              self.gamma3 + other.gamma3)

    def argmin(self) -> float:
        return -self.gamma2 / (2.0 * self.gamma1)


class PiecewiseQuadratic:
    """Continuous piecewise quadratic stored as breakpoints plus coefficient arrays."""

    __slots__ = ("breaks", "quad", "lin", "const")

    def __init__(self, breaks, quad, lin, const):
        self.breaks = np.asarray(breaks, dtype=float)
        self.quad = np.asarray(quad, dtype=float)
        self.lin = np.asarray(lin, dtype=float)
        self.const = np.asarray(const, dtype=float)
        n = len(self.quad)
        if n == 0 or len(self.breaks) != n + 1 or len(self.lin) != n or len(self.const) != n:
            raise ValueError("need N >= 1 pieces and N + 1 breakpoints")
        if self.breaks[0] != -INF or self.breaks[-1] != INF:
            raise ValueError("breakpoints must start at -inf and end at +inf")

    @classmethod
    def from_pieces(cls, breakpoints: Sequence[float], pieces: Sequence[QuadraticPiece]):
        """Build from interior breakpoints (sentinels optional) and a list of pieces."""
        bps = list(breakpoints)
        if not bps or bps[0] != -INF:
            bps = [-INF] + bps
        if bps[-1] != INF:
            bps = bps + [INF]
        return cls(bps, [p.gamma1 for p in pieces], [p.gamma2 for p in pieces],
                   [p.gamma3 for p in pieces])

    @classmethod
    def single(cls, piece: QuadraticPiece):
        return cls([-INF, INF], [piece.gamma1], [piece.gamma2], [piece.gamma3])

    @property
    def n_pieces(self) -> int:
        return len(self.quad)

    @property
    def pieces(self) -> list[QuadraticPiece]:
        return [QuadraticPiece(float(a), float(b), float(c))
                for a, b, c in zip(self.quad, self.lin, self.const)]

    @property
    def interior_breaks(self) -> np.ndarray:
        return self.breaks[1:-1]

    def arrays(self):
        return self.breaks, self.quad, self.lin, self.const

    def piece_index(self, t):
        return np.searchsorted(self.breaks[1:-1], t, side="right")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        k = self.piece_index(t_arr)
        out = (self.quad[k] * t_arr + self.lin[k]) * t_arr + self.const[k]
        return float(out) if out.ndim == 0 else out

    def global_pieces(self, t) -> np.ndarray:
        """Every piece evaluated as a global quadratic; shape ``(len(t), N)``."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
        return (self.quad * t_arr + self.lin) * t_arr + self.const

    def __repr__(self):
        return (f"{type(self).__name__}(breaks={self.breaks.tolist()}, quad={self.quad.tolist()}, "
                f"lin={self.lin.tolist()}, const={self.const.tolist()})")

    def same_as(self, other: "PiecewiseQuadratic", rtol: float = 1e-12) -> bool:
        if self.n_pieces != other.n_pieces:
            return False
        return all(np.allclose(x, y, rtol=rtol, atol=rtol)
                   for x, y in zip(self.arrays(), other.arrays()))


class ConjugateFn(PiecewiseQuadratic):
    """Convex piecewise quadratic equal to the maximum of its pieces."""

    __slots__ = ()


@dataclass(frozen=True)
class IndicatorCost:
    """``base(t) + lam * 1[t != 0]``; the indicator is absent when ``has_indicator`` is false."""

    base: PiecewiseQuadratic
    lam: float = 0.0
    has_indicator: bool = True

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.base(t_arr), dtype=float)
        if self.has_indicator:
            out = out + self.lam * (t_arr != 0)
        return float(out) if out.ndim == 0 else out


def evaluate(f, alpha):
    """Value of a piecewise quadratic, conjugate or indicator cost at ``alpha``."""
    return f(alpha)


def conjugate_of_quadratic(p: QuadraticPiece) -> QuadraticPiece:
    """Closed-form conjugate ``(s - g2)^2 / (4 g1) - g3`` of a strongly convex quadratic."""
    if not p.gamma1 > 0.0:
        raise DegeneratePieceError(f"quadratic coefficient {p.gamma1} is not positive")
    a = p.gamma1
    return QuadraticPiece(0.25 / a, -0.5 * p.gamma2 / a, 0.25 * p.gamma2 * p.gamma2 / a - p.gamma3)


def add_quadratic(f: PiecewiseQuadratic, q: QuadraticPiece) -> PiecewiseQuadratic:
    """Add one global quadratic to every piece; breakpoints are unchanged."""
    return type(f)(f.breaks, f.quad + q.gamma1, f.lin + q.gamma2, f.const + q.gamma3)


def negate(f: PiecewiseQuadratic) -> PiecewiseQuadratic:
    return PiecewiseQuadratic(f.breaks, -f.quad, -f.lin, -f.const)


def merge_identical(f: PiecewiseQuadratic) -> PiecewiseQuadratic:
    return type(f)(*kernels.merge_identical(*f.arrays()))


def scaled_sum(fs: Sequence[PiecewiseQuadratic], scales: Sequence[float]) -> PiecewiseQuadratic:
    """``sum_l f_l(scales[l] * t)`` with breakpoints on the union of the rescaled lists.

    A negative scale reverses that function's breakpoint order.
    """
    if not fs:
        raise ValueError("need at least one function")
    if len(fs) != len(scales):
        raise ValueError("one scale per function")
    for s in scales:
        if s == 0.0 or not math.isfinite(s):
            raise ValueError("scales must be finite and nonzero")
    out = kernels.scaled_sum([f.arrays() for f in fs], [float(s) for s in scales])
    return PiecewiseQuadratic(*kernels.merge_identical(*out))


def slope(pk: QuadraticPiece, tk_lo: float, tk_hi: float,
          pl: QuadraticPiece, tl_lo: float, tl_hi: float) -> float:
    """Slope of the line tangent to ``pk`` on its interval and ``pl`` on its interval.

    ``+inf`` / ``-inf`` signal that no feasible common tangent exists.
    """
    if not (pk.gamma1 > 0 and pl.gamma1 > 0):
        raise DegeneratePieceError("both pieces must be strongly convex")
    if pk == pl:
        raise ValueError("identical pieces have no unique common tangent; merge them first")
    return kernels.tangent_slope(pk.gamma1, pk.gamma2, pk.gamma3, tk_lo, tk_hi,
                                 pl.gamma1, pl.gamma2, pl.gamma3, tl_lo, tl_hi)


def breakpoint_conjugate(f: IndicatorCost, trace=None, envelope: bool = False) -> ConjugateFn:
    """Conjugate of ``base + lam*1[t != 0]`` via the linear ADD/DELETE sweep.

    ``trace(gamma, pi)``, when given, is called after every sweep step with the
    current candidate breakpoints and piece indices (uses the Python kernel).
    ``envelope=True`` asserts that ``base`` is the minimum of its pieces on the
    whole line (consistent), so tangent slopes need not consult the intervals.
    """
    base = f.base
    if not np.all(base.quad > 0.0):
        raise DegeneratePieceError("base pieces must be strongly convex")
    if f.has_indicator and not f.lam > 0.0:
        raise ValueError("indicator weight must be positive; drop the indicator instead")
    mod = _pykernels if trace is not None else kernels
    args = (*base.arrays(), float(f.lam), bool(f.has_indicator))
    if trace is not None:
        return ConjugateFn(*mod.conjugate(*args, trace=trace, envelope=envelope))
    return ConjugateFn(*mod.conjugate(*args, envelope=envelope))


def envelope_roots(gstar: ConjugateFn, lam: float, g0: float) -> tuple[float, float]:
    """The two solutions of ``gstar(s) - lam = -g0`` for a strictly convex ``gstar``."""
    if not lam > 0.0:
        raise ValueError("lam must be positive")
    roots = []
    br = gstar.breaks
    for k in range(gstar.n_pieces):
        a, b, c = gstar.quad[k], gstar.lin[k], gstar.const[k] - lam + g0
        lo, hi = br[k], br[k + 1]
        if a == 0.0:
            cand = [-c / b] if b != 0.0 else []
        else:
            disc = b * b - 4.0 * a * c
            if disc < 0.0:
                cand = []
            else:
                sq = math.sqrt(disc)
                q = -0.5 * (b + math.copysign(sq, b))
                cand = [q / a, c / q] if q != 0.0 else [0.0]
        for r in cand:
            if lo <= r <= hi and all(abs(r - x) > 1e-12 * (1 + abs(r)) for x in roots):
                roots.append(r)
    roots.sort()
    if len(roots) < 2:
        raise NumericalDegeneracyError(f"expected two envelope roots, found {len(roots)}")
    return roots[0], roots[-1]


def clip(f: PiecewiseQuadratic, M: float) -> PiecewiseQuadratic:
    """Drop breakpoints outside ``[-M, M]``; the outermost kept pieces extend to infinity."""
    if not M > 0:
        raise ValueError("M must be positive")
    inner = f.breaks[1:-1]
    lo = int(np.searchsorted(inner, -M, side="left"))
    hi = int(np.searchsorted(inner, M, side="right"))
    if lo == 0 and hi == len(inner):
        return f
    if lo == hi:
        k = int(f.piece_index(0.0))
        return type(f)([-INF, INF], f.quad[k:k + 1], f.lin[k:k + 1], f.const[k:k + 1])
    breaks = np.concatenate(([-INF], inner[lo:hi], [INF]))
    return type(f)(breaks, f.quad[lo:hi + 1], f.lin[lo:hi + 1], f.const[lo:hi + 1])


def minimize(f: IndicatorCost, shift: float = 0.0) -> tuple[float, float]:
    """Global minimizer and minimum of ``f(t) + shift * t``.

    Ties within ``1e-10`` go to ``t = 0``, then to the smaller ``|t|``.
    """
    return kernels.minimize(*f.base.arrays(), float(f.lam), bool(f.has_indicator), float(shift))


def value_at_zero(f: PiecewiseQuadratic) -> float:
    return kernels.value_at_zero(f.breaks, f.const)


def is_continuous(f: PiecewiseQuadratic, rtol: float = CONT_RTOL) -> bool:
    inner = f.breaks[1:-1]
    left = (f.quad[:-1] * inner + f.lin[:-1]) * inner + f.const[:-1]
    right = (f.quad[1:] * inner + f.lin[1:]) * inner + f.const[1:]
    return bool(np.all(np.abs(left - right) <= rtol * (1.0 + np.abs(left))))
