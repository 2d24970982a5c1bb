"""Pure-Python kernels for piecewise-quadratic arithmetic.

Every public function here has a twin with the same signature in the compiled
``_ckernels`` module.  Functions take and return plain float64 arrays:
``breaks`` has ``N + 1`` entries with ``-inf`` first and ``+inf`` last, and
``quad``, ``lin``, ``const`` hold the coefficients of the ``N`` pieces
``quad * t**2 + lin * t + const``.
"""

import bisect
import math

import numpy as np

from .errors import InconsistentFunctionError

INF = math.inf

COEF_RTOL = 1e-9
SLOPE_SLACK = 1e-12
SPAN_RTOL = 1e-10
DISC_RTOL = 1e-14
VAL_RTOL = 1e-9


def _inside(x, lo, hi):
    return lo - SPAN_RTOL * (1.0 + abs(lo)) <= x <= hi + SPAN_RTOL * (1.0 + abs(hi))


def _conj_roots(ai, bi, ci, aj, bj, cj):
    """Real roots of p_i*(s) - p_j*(s), plus the sign of the difference when none exist."""
    qa = (aj - ai) / (4.0 * ai * aj)
    qb = 0.5 * (bj / aj - bi / ai)
    qc = 0.25 * (bi * bi / ai - bj * bj / aj) + (cj - ci)
    if qa == 0.0:
        if qb == 0.0:
            return (), qc
        return (-qc / qb,), 0.0
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        if disc < -DISC_RTOL * (qb * qb + abs(4.0 * qa * qc)):
            return (), qa
        disc = 0.0
    q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
    if q == 0.0:
        return (0.0,), 0.0
    r1 = q / qa
    r2 = qc / q
    if r1 > r2:
        r1, r2 = r2, r1
    return (r1, r2), 0.0


def tangent_slope(ai, bi, ci, lo_i, hi_i, aj, bj, cj, lo_j, hi_j):
    """Slope of the feasible common tangent of two strongly convex pieces.

    Piece ``i`` lives on ``[lo_i, hi_i]`` and piece ``j`` on ``[lo_j, hi_j]``
    with ``hi_i <= lo_j``.  Returns ``+inf`` when neither candidate tangent
    touches piece ``j`` inside its interval and ``-inf`` when one does but
    misses piece ``i``.
    """
    roots, sign = _conj_roots(ai, bi, ci, aj, bj, cj)
    if not roots:
        # one conjugate dominates everywhere; keep the dominant piece
        return INF if sign > 0.0 else -INF
    j_hit = False
    for s in roots:
        tj = (s - bj) / (2.0 * aj)
        if _inside(tj, lo_j, hi_j):
            j_hit = True
            ti = (s - bi) / (2.0 * ai)
            if _inside(ti, lo_i, hi_i):
                return s
    return -INF if j_hit else INF


def _near(a, b, c, k, m, x):
    v = (a[k] * x + b[k]) * x + c[k]
    w = (a[m] * x + b[m]) * x + c[m]
    return abs(v - w) <= VAL_RTOL * (1.0 + abs(w))


def _touches(a, b, c, t, k, x):
    """Whether piece ``k`` is (numerically) the active piece at ``x``, near its interval.

    Inside the stored interval always counts.  Just outside it, within the
    adjacent interval, the piece still counts when its value is within
    ``VAL_RTOL`` of that neighbour: breakpoints between nearly identical pieces
    are ill-conditioned, and the stored ones can sit measurably off the true
    crossing.
    """
    if _inside(x, t[k], t[k + 1]):
        return True
    if x < t[k]:
        m = k - 1
        if m < 0 or x < t[m]:
            return False
    else:
        m = k + 1
        if m >= len(a) or x > t[m + 1]:
            return False
    return _near(a, b, c, k, m, x)


def _touches_anywhere(a, b, c, t, k, x):
    """Like :func:`_touches`, but also accepts ``x`` on any copy of piece ``k``.

    The top of the sweep stack stands in for later repeats of the same piece,
    so its tangency may legitimately fall in a repeat's interval.
    """
    if _touches(a, b, c, t, k, x):
        return True
    if x != x or x == INF or x == -INF:
        return False
    m = bisect.bisect_right(t, x, 1, len(t) - 1) - 1
    return _near(a, b, c, k, m, x)


def _same_piece(a, b, c, i, j):
    return (abs(a[i] - a[j]) <= COEF_RTOL * (1.0 + max(abs(a[i]), abs(a[j])))
            and abs(b[i] - b[j]) <= COEF_RTOL * (1.0 + max(abs(b[i]), abs(b[j])))
            and abs(c[i] - c[j]) <= COEF_RTOL * (1.0 + max(abs(c[i]), abs(c[j]))))


def _pair_slope(a, b, c, t, i, j):
    """:func:`tangent_slope` for pieces ``i < j`` of one function.

    Feasibility uses :func:`_touches` for ``j`` and :func:`_touches_anywhere`
    for ``i``, plus the ordering ``alpha_i <= alpha_j``
    of the two tangency points, which singles out one root.
    """
    roots, sign = _conj_roots(a[i], b[i], c[i], a[j], b[j], c[j])
    if not roots:
        return INF if sign > 0.0 else -INF
    j_hit = False
    for s in roots:
        tj = (s - b[j]) / (2.0 * a[j])
        if _touches(a, b, c, t, j, tj):
            j_hit = True
            ti = (s - b[i]) / (2.0 * a[i])
            if ti <= tj + SPAN_RTOL * (1.0 + abs(tj)) and _touches_anywhere(a, b, c, t, i, ti):
                return s
    return -INF if j_hit else INF


def _env_slope(a, b, c, i, j):
    """Slope at which piece ``j``'s conjugate overtakes piece ``i``'s, moving right.

    Only coefficients are used: of the (at most two) crossings of the two
    conjugates, the one whose tangency points are ordered ``alpha_i <= alpha_j``.
    Valid when the function is the minimum of its pieces everywhere, where the
    conjugate is the upper envelope of the piece conjugates.
    """
    roots, sign = _conj_roots(a[i], b[i], c[i], a[j], b[j], c[j])
    if not roots:
        return INF if sign > 0.0 else -INF
    if len(roots) == 2 and roots[0] == roots[1]:
        # touching conjugates: the one with the smaller curvature dominates
        return INF if a[j] > a[i] else -INF
    for s in roots:
        if (s - b[i]) / (2.0 * a[i]) <= (s - b[j]) / (2.0 * a[j]):
            return s
    return INF


def sweep(quad, lin, const, breaks, trace=None, envelope=False):
    """ADD/DELETE sweep over the pieces of a semi-consistent function.

    Returns ``(pi, gamma)``: the indices of the pieces whose conjugates make up
    the conjugate, and its breakpoints (``len(gamma) == len(pi) + 1``).
    ``trace`` is called with copies of both lists after every step.

    With ``envelope=True`` the function must be the minimum of its pieces on
    the whole line; tangent slopes then ignore the stored intervals, which
    keeps the sweep exact where far-out breakpoints are dominated by rounding.
    """
    a = quad.tolist() if hasattr(quad, "tolist") else list(quad)
    b = lin.tolist() if hasattr(lin, "tolist") else list(lin)
    c = const.tolist() if hasattr(const, "tolist") else list(const)
    t = breaks.tolist() if hasattr(breaks, "tolist") else list(breaks)
    n = len(a)
    gamma = [-INF]
    pi = [0]
    j = 1
    while j < n:
        i = pi[-1]
        if _same_piece(a, b, c, i, j):
            # a repeat of the current top piece: its conjugate adds nothing
            j += 1
            if trace is not None:
                trace(list(gamma), list(pi))
            continue
        s = _env_slope(a, b, c, i, j) if envelope else _pair_slope(a, b, c, t, i, j)
        if s != s:
            raise InconsistentFunctionError(f"tangent slope between pieces {i} and {j} is NaN")
        last = gamma[-1]
        if last == -INF:
            add = s > -INF
        elif last == INF:
            add = False
        else:
            add = s > last + SLOPE_SLACK * (1.0 + abs(last))
        if add:
            gamma.append(s)
            pi.append(j)
            j += 1
        elif len(pi) == 1:
            # the first surviving piece never touches the envelope
            pi[0] = j
            j += 1
        else:
            gamma.pop()
            pi.pop()
        if trace is not None:
            trace(list(gamma), list(pi))
    while gamma[-1] == INF:
        gamma.pop()
        pi.pop()
    gamma.append(INF)
    return pi, gamma


def merge_identical(breaks, quad, lin, const):
    """Drop breakpoints between adjacent pieces whose coefficients agree."""
    if len(quad) < 2:
        return breaks, quad, lin, const

    def close(x):
        return np.abs(x[1:] - x[:-1]) <= COEF_RTOL * (1.0 + np.maximum(np.abs(x[1:]), np.abs(x[:-1])))

    same = close(quad) & close(lin) & close(const)
    if not same.any():
        return breaks, quad, lin, const
    keep = np.concatenate(([True], ~same))
    keep_b = np.concatenate((keep, [True]))
    return breaks[keep_b], quad[keep], lin[keep], const[keep]


def scaled_sum(parts, scales):
    """Sum of ``f_l(scale_l * t)`` over piecewise quadratics ``f_l``."""
    if len(parts) == 1:
        return _rescale(parts[0], scales[0])
    scaled = [_rescale(p, s) for p, s in zip(parts, scales)]
    inner = [sb[1:-1] for sb, _, _, _ in scaled]
    merged = np.unique(np.concatenate(inner))
    lefts = np.concatenate(([-INF], merged))
    quad = np.zeros(len(lefts))
    lin = np.zeros(len(lefts))
    const = np.zeros(len(lefts))
    for (_, sa, sb, sc), bps in zip(scaled, inner):
        idx = np.searchsorted(bps, lefts, side="right")
        quad += sa[idx]
        lin += sb[idx]
        const += sc[idx]
    breaks = np.concatenate(([-INF], merged, [INF]))
    return breaks, quad, lin, const


def _rescale(part, s):
    breaks, quad, lin, const = part
    inner = breaks[1:-1] / s
    qa = quad * (s * s)
    qb = lin * s
    qc = const
    if s < 0:
        inner = inner[::-1]
        qa, qb, qc = qa[::-1], qb[::-1], qc[::-1]
    return np.concatenate(([-INF], inner, [INF])), qa, qb, np.array(qc, dtype=float)


def node_base(parts, scales, half_diag, lin_coef):
    """Consistent base of a node cost: ``half_diag*t^2 + lin_coef*t - sum_v f_v*(s_v t)``."""
    if not parts:
        return (np.array([-INF, INF]), np.array([half_diag]), np.array([lin_coef]), np.zeros(1))
    breaks, quad, lin, const = scaled_sum(parts, scales)
    return merge_identical(breaks, half_diag - quad, lin_coef - lin, -const)


def value_at_zero(breaks, const):
    k = int(np.searchsorted(breaks[1:-1], 0.0, side="right"))
    return float(const[k])


def conjugate(breaks, quad, lin, const, lam, has_indicator, trace=None, envelope=False):
    """Conjugate of ``base + lam * 1[t != 0]`` for a semi-consistent base (see :func:`sweep`)."""
    pi, gamma = sweep(quad, lin, const, breaks, trace, envelope)
    a = [quad[k] for k in pi]
    b = [lin[k] for k in pi]
    c = [const[k] for k in pi]
    if not has_indicator:
        return _conj_arrays(gamma, a, b, c, 0.0)
    g0 = value_at_zero(breaks, const)
    m = len(pi)
    # h(s) = p*(s) - lam + g0 on each piece; vertex of p* sits at s = b
    w = [c[k] + lam - g0 for k in range(m)]
    low = []
    for k in range(m):
        d = min(max(b[k], gamma[k]), gamma[k + 1]) - b[k]
        low.append(d * d / (4.0 * a[k]) - w[k])
    neg = [k for k in range(m) if low[k] < 0.0]
    if not neg:
        return _conj_arrays(gamma, a, b, c, lam)
    k1, k2 = neg[0], neg[-1]
    beta1 = b[k1] - 2.0 * math.sqrt(a[k1] * max(w[k1], 0.0))
    beta1 = min(max(beta1, gamma[k1]), gamma[k1 + 1])
    beta2 = b[k2] + 2.0 * math.sqrt(a[k2] * max(w[k2], 0.0))
    beta2 = min(max(beta2, gamma[k2]), gamma[k2 + 1])
    if not beta2 > beta1:
        return _conj_arrays(gamma, a, b, c, lam)
    # assemble: pieces left of beta1, plateau, pieces right of beta2
    out_b = [-INF]
    ca, cb, cc = [], [], []
    for k in range(k1 + 1):
        hi = beta1 if k == k1 else gamma[k + 1]
        if hi > out_b[-1]:
            ca.append(0.25 / a[k])
            cb.append(-0.5 * b[k] / a[k])
            cc.append(0.25 * b[k] * b[k] / a[k] - c[k] - lam)
            out_b.append(hi)
    ca.append(0.0)
    cb.append(0.0)
    cc.append(-g0)
    out_b.append(beta2)
    for k in range(k2, m):
        hi = gamma[k + 1]
        if hi > out_b[-1]:
            ca.append(0.25 / a[k])
            cb.append(-0.5 * b[k] / a[k])
            cc.append(0.25 * b[k] * b[k] / a[k] - c[k] - lam)
            out_b.append(hi)
    if out_b[-1] != INF:
        # the plateau reaches +inf only if beta2 was clamped there, which cannot happen
        raise InconsistentFunctionError("indicator plateau does not close on the right")
    return merge_identical(np.array(out_b), np.array(ca), np.array(cb), np.array(cc))


def _conj_arrays(gamma, a, b, c, shift):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    return merge_identical(
        np.asarray(gamma, dtype=float), 0.25 / a, -0.5 * b / a, 0.25 * b * b / a - c - shift
    )


def minimize(breaks, quad, lin, const, lam, has_indicator, shift=0.0):
    """Minimum of ``base(t) + shift*t + lam*1[t != 0]`` over the represented pieces.

    Returns ``(t, value)``; ties go to ``t = 0`` and then to the smaller ``|t|``.
    """
    b = lin + shift
    vert = -b / (2.0 * quad)
    t = np.minimum(np.maximum(vert, breaks[:-1]), breaks[1:])
    vals = (quad * t + b) * t + const
    if has_indicator:
        vals = vals + lam
    k = int(np.argmin(vals))
    best_t, best_v = float(t[k]), float(vals[k])
    zero_v = value_at_zero(breaks, const)
    if zero_v <= best_v + 1e-10 * (1.0 + abs(best_v)):
        return 0.0, zero_v
    # among near-ties prefer the smaller |t|, then the smaller t
    tie = np.flatnonzero(vals <= best_v + 1e-10 * (1.0 + abs(best_v)))
    if len(tie) > 1:
        order = sorted(tie, key=lambda i: (abs(t[i]), t[i]))
        k = order[0]
        best_t, best_v = float(t[k]), float(vals[k])
    return best_t, best_v
