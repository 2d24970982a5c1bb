# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

Each public function has the same signature and returns the same values as
its Python counterpart; the arithmetic is written operation for operation so
the two backends agree to the last bit (the extension is built without
floating-point contraction).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, copysign, fabs, sqrt

from .errors import InconsistentFunctionError

cnp.import_array()

cdef double COEF_RTOL = 1e-9
cdef double SLOPE_SLACK = 1e-12
cdef double SPAN_RTOL = 1e-10
cdef double DISC_RTOL = 1e-14
cdef double VAL_RTOL = 1e-9
cdef double INF = INFINITY


cdef inline double _fmax(double x, double y) noexcept nogil:
    return x if x >= y else y


cdef inline double _fmin(double x, double y) noexcept nogil:
    return x if x <= y else y


cdef inline bint _inside(double x, double lo, double hi) noexcept nogil:
    return lo - SPAN_RTOL * (1.0 + fabs(lo)) <= x <= hi + SPAN_RTOL * (1.0 + fabs(hi))


cdef int _conj_roots(double ai, double bi, double ci, double aj, double bj, double cj,
                     double* r, double* sign) noexcept nogil:
    cdef double qa = (aj - ai) / (4.0 * ai * aj)
    cdef double qb = 0.5 * (bj / aj - bi / ai)
    cdef double qc = 0.25 * (bi * bi / ai - bj * bj / aj) + (cj - ci)
    cdef double disc, q, r1, r2
    sign[0] = 0.0
    if qa == 0.0:
        if qb == 0.0:
            sign[0] = qc
            return 0
        r[0] = -qc / qb
        return 1
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        if disc < -DISC_RTOL * (qb * qb + fabs(4.0 * qa * qc)):
            sign[0] = qa
            return 0
        disc = 0.0
    q = -0.5 * (qb + copysign(sqrt(disc), qb))
    if q == 0.0:
        r[0] = 0.0
        return 1
    r1 = q / qa
    r2 = qc / q
    if r1 > r2:
        r1, r2 = r2, r1
    r[0] = r1
    r[1] = r2
    return 2


def tangent_slope(double ai, double bi, double ci, double lo_i, double hi_i,
                  double aj, double bj, double cj, double lo_j, double hi_j):
    cdef double roots[2]
    cdef double sign, s, tj, ti
    cdef int nr = _conj_roots(ai, bi, ci, aj, bj, cj, roots, &sign)
    cdef int k
    cdef bint j_hit = False
    if nr == 0:
        return INF if sign > 0.0 else -INF
    for k in range(nr):
        s = roots[k]
        tj = (s - bj) / (2.0 * aj)
        if _inside(tj, lo_j, hi_j):
            j_hit = True
            ti = (s - bi) / (2.0 * ai)
            if _inside(ti, lo_i, hi_i):
                return s
    return -INF if j_hit else INF


cdef inline bint _near(const double* a, const double* b, const double* c, Py_ssize_t k,
                       Py_ssize_t m, double x) noexcept nogil:
    cdef double v = (a[k] * x + b[k]) * x + c[k]
    cdef double w = (a[m] * x + b[m]) * x + c[m]
    return fabs(v - w) <= VAL_RTOL * (1.0 + fabs(w))


cdef bint _touches(const double* a, const double* b, const double* c, const double* t,
                   Py_ssize_t n, Py_ssize_t k, double x) noexcept nogil:
    cdef Py_ssize_t m
    if _inside(x, t[k], t[k + 1]):
        return True
    if x < t[k]:
        m = k - 1
        if m < 0 or x < t[m]:
            return False
    else:
        m = k + 1
        if m >= n or x > t[m + 1]:
            return False
    return _near(a, b, c, k, m, x)


cdef bint _touches_anywhere(const double* a, const double* b, const double* c, const double* t,
                            Py_ssize_t n, Py_ssize_t k, double x) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    if _touches(a, b, c, t, n, k, x):
        return True
    if x != x or x == INF or x == -INF:
        return False
    # bisect_right(t, x, 1, n) - 1
    lo = 1
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if x < t[mid]:
            hi = mid
        else:
            lo = mid + 1
    return _near(a, b, c, k, lo - 1, x)


cdef inline bint _close(double x, double y) noexcept nogil:
    return fabs(x - y) <= COEF_RTOL * (1.0 + _fmax(fabs(x), fabs(y)))


cdef inline bint _same_piece(const double* a, const double* b, const double* c,
                             Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    return _close(a[i], a[j]) and _close(b[i], b[j]) and _close(c[i], c[j])


cdef double _pair_slope(const double* a, const double* b, const double* c, const double* t,
                        Py_ssize_t n, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double roots[2]
    cdef double sign, s, tj, ti
    cdef int nr = _conj_roots(a[i], b[i], c[i], a[j], b[j], c[j], roots, &sign)
    cdef int k
    cdef bint j_hit = False
    if nr == 0:
        return INF if sign > 0.0 else -INF
    for k in range(nr):
        s = roots[k]
        tj = (s - b[j]) / (2.0 * a[j])
        if _touches(a, b, c, t, n, j, tj):
            j_hit = True
            ti = (s - b[i]) / (2.0 * a[i])
            if ti <= tj + SPAN_RTOL * (1.0 + fabs(tj)) and _touches_anywhere(a, b, c, t, n, i, ti):
                return s
    return -INF if j_hit else INF


cdef double _env_slope(const double* a, const double* b, const double* c,
                       Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double roots[2]
    cdef double sign, s
    cdef int nr = _conj_roots(a[i], b[i], c[i], a[j], b[j], c[j], roots, &sign)
    cdef int k
    if nr == 0:
        return INF if sign > 0.0 else -INF
    if nr == 2 and roots[0] == roots[1]:
        return INF if a[j] > a[i] else -INF
    for k in range(nr):
        s = roots[k]
        if (s - b[i]) / (2.0 * a[i]) <= (s - b[j]) / (2.0 * a[j]):
            return s
    return INF


cdef inline double[::1] _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


cdef Py_ssize_t _sweep(const double* a, const double* b, const double* c, const double* t,
                       Py_ssize_t n, Py_ssize_t* pi, double* gamma, object trace,
                       bint envelope) except -1:
    """Fills ``pi`` and ``gamma``; returns the number of pieces kept."""
    cdef Py_ssize_t m = 1, j = 1, i
    cdef double s, last
    cdef bint add
    gamma[0] = -INF
    pi[0] = 0
    while j < n:
        i = pi[m - 1]
        if _same_piece(a, b, c, i, j):
            j += 1
            if trace is not None:
                trace([gamma[k] for k in range(m)], [pi[k] for k in range(m)])
            continue
        if envelope:
            s = _env_slope(a, b, c, i, j)
        else:
            s = _pair_slope(a, b, c, t, n, i, j)
        if s != s:
            raise InconsistentFunctionError(f"tangent slope between pieces {i} and {j} is NaN")
        last = gamma[m - 1]
        if last == -INF:
            add = s > -INF
        elif last == INF:
            add = False
        else:
            add = s > last + SLOPE_SLACK * (1.0 + fabs(last))
        if add:
            gamma[m] = s
            pi[m] = j
            m += 1
            j += 1
        elif m == 1:
            pi[0] = j
            j += 1
        else:
            m -= 1
        if trace is not None:
            trace([gamma[k] for k in range(m)], [pi[k] for k in range(m)])
    while gamma[m - 1] == INF:
        m -= 1
    gamma[m] = INF
    return m


def sweep(quad, lin, cst, breaks, trace=None, bint envelope=False):
    cdef double[::1] a = _f64(quad), b = _f64(lin), c = _f64(cst), t = _f64(breaks)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] pi = np.empty(n, dtype=np.intp)
    cdef double[::1] gamma = np.empty(n + 1)
    cdef Py_ssize_t m = _sweep(&a[0], &b[0], &c[0], &t[0], n, <Py_ssize_t*> pi.data, &gamma[0], trace, envelope)
    return [int(pi[k]) for k in range(m)], [gamma[k] for k in range(m + 1)]


def merge_identical(breaks, quad, lin, cst):
    cdef double[::1] a = _f64(quad), b = _f64(lin), c = _f64(cst)
    cdef Py_ssize_t n = a.shape[0], k, kept
    if n < 2:
        return breaks, quad, lin, cst
    keep = np.ones(n, dtype=bool)
    cdef cnp.npy_bool[::1] kv = keep
    kept = n
    for k in range(1, n):
        if _close(a[k], a[k - 1]) and _close(b[k], b[k - 1]) and _close(c[k], c[k - 1]):
            kv[k] = False
            kept -= 1
    if kept == n:
        return breaks, quad, lin, cst
    keep_b = np.concatenate((keep, [True]))
    return breaks[keep_b], quad[keep], lin[keep], cst[keep]


cdef tuple _rescale(tuple part, double s):
    cdef double[::1] br = _f64(part[0]), qa = _f64(part[1]), qb = _f64(part[2]), qc = _f64(part[3])
    cdef Py_ssize_t n = qa.shape[0], k, src
    cdef double ss = s * s
    out_b = np.empty(n + 1)
    out_a = np.empty(n)
    out_l = np.empty(n)
    out_c = np.empty(n)
    cdef double[::1] ob = out_b, oa = out_a, ol = out_l, oc = out_c
    ob[0] = -INF
    ob[n] = INF
    for k in range(n):
        src = n - 1 - k if s < 0 else k
        oa[k] = qa[src] * ss
        ol[k] = qb[src] * s
        oc[k] = qc[src]
    for k in range(1, n):
        src = n - k if s < 0 else k
        ob[k] = br[src] / s
    return out_b, out_a, out_l, out_c


def scaled_sum(parts, scales):
    if len(parts) == 1:
        return _rescale(tuple(parts[0]), scales[0])
    scaled = [_rescale(tuple(part), s) for part, s in zip(parts, scales)]
    merged = np.unique(np.concatenate([sb[1:-1] for sb, _, _, _ in scaled]))
    cdef Py_ssize_t nm = merged.shape[0], k, p, nb
    quad = np.zeros(nm + 1)
    lin = np.zeros(nm + 1)
    cst = np.zeros(nm + 1)
    cdef double[::1] oq = quad, ol = lin, oc = cst, mv = merged
    cdef double[::1] sb, sa, sl, sc
    cdef double left
    for part in scaled:
        sb = part[0]
        sa = part[1]
        sl = part[2]
        sc = part[3]
        nb = sb.shape[0] - 2  # interior breakpoints
        p = 0
        for k in range(nm + 1):
            left = -INF if k == 0 else mv[k - 1]
            while p < nb and sb[p + 1] <= left:
                p += 1
            oq[k] += sa[p]
            ol[k] += sl[p]
            oc[k] += sc[p]
    breaks = np.empty(nm + 2)
    breaks[0] = -INF
    breaks[1:nm + 1] = merged
    breaks[nm + 1] = INF
    return breaks, quad, lin, cst


def node_base(parts, scales, double half_diag, double lin_coef):
    if not parts:
        return (np.array([-INF, INF]), np.array([half_diag]), np.array([lin_coef]), np.zeros(1))
    breaks, quad, lin, cst = scaled_sum(parts, scales)
    cdef double[::1] q = quad, l = lin, c = cst
    cdef Py_ssize_t k
    for k in range(q.shape[0]):
        q[k] = half_diag - q[k]
        l[k] = lin_coef - l[k]
        c[k] = -c[k]
    return merge_identical(breaks, quad, lin, cst)


cdef inline Py_ssize_t _zero_piece(const double* t, Py_ssize_t n) noexcept nogil:
    # number of interior breakpoints <= 0.0
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if 0.0 < t[mid + 1]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def value_at_zero(breaks, cst):
    cdef double[::1] t = _f64(breaks), c = _f64(cst)
    return float(c[_zero_piece(&t[0], c.shape[0])])


cdef tuple _conj_arrays(const double* gamma, const double* a, const double* b, const double* c,
                        Py_ssize_t m, double shift):
    out_b = np.empty(m + 1)
    out_a = np.empty(m)
    out_l = np.empty(m)
    out_c = np.empty(m)
    cdef double[::1] ob = out_b, oa = out_a, ol = out_l, oc = out_c
    cdef Py_ssize_t k
    for k in range(m):
        ob[k] = gamma[k]
        oa[k] = 0.25 / a[k]
        ol[k] = -0.5 * b[k] / a[k]
        oc[k] = 0.25 * b[k] * b[k] / a[k] - c[k] - shift
    ob[m] = gamma[m]
    return merge_identical(out_b, out_a, out_l, out_c)


def conjugate(breaks, quad, lin, cst, double lam, bint has_indicator, trace=None, bint envelope=False):
    cdef double[::1] qa = _f64(quad), qb = _f64(lin), qc = _f64(cst), t = _f64(breaks)
    cdef Py_ssize_t n = qa.shape[0], m, k, k1 = -1, k2 = -1, no
    pi_arr = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] pi = pi_arr
    cdef double[::1] gamma = np.empty(n + 1)
    cdef double[::1] a = np.empty(n), b = np.empty(n), c = np.empty(n), w = np.empty(n)
    cdef double g0, d, low, beta1, beta2, hi
    m = _sweep(&qa[0], &qb[0], &qc[0], &t[0], n, <Py_ssize_t*> &pi[0], &gamma[0], trace, envelope)
    for k in range(m):
        a[k] = qa[pi[k]]
        b[k] = qb[pi[k]]
        c[k] = qc[pi[k]]
    if not has_indicator:
        return _conj_arrays(&gamma[0], &a[0], &b[0], &c[0], m, 0.0)
    g0 = qc[_zero_piece(&t[0], n)]
    for k in range(m):
        w[k] = c[k] + lam - g0
        d = _fmin(_fmax(b[k], gamma[k]), gamma[k + 1]) - b[k]
        low = d * d / (4.0 * a[k]) - w[k]
        if low < 0.0:
            if k1 < 0:
                k1 = k
            k2 = k
    if k1 < 0:
        return _conj_arrays(&gamma[0], &a[0], &b[0], &c[0], m, lam)
    beta1 = b[k1] - 2.0 * sqrt(a[k1] * _fmax(w[k1], 0.0))
    beta1 = _fmin(_fmax(beta1, gamma[k1]), gamma[k1 + 1])
    beta2 = b[k2] + 2.0 * sqrt(a[k2] * _fmax(w[k2], 0.0))
    beta2 = _fmin(_fmax(beta2, gamma[k2]), gamma[k2 + 1])
    if not beta2 > beta1:
        return _conj_arrays(&gamma[0], &a[0], &b[0], &c[0], m, lam)
    out_b = np.empty(m + 3)
    out_a = np.empty(m + 2)
    out_l = np.empty(m + 2)
    out_c = np.empty(m + 2)
    cdef double[::1] ob = out_b, oa = out_a, ol = out_l, oc = out_c
    ob[0] = -INF
    no = 0
    for k in range(k1 + 1):
        hi = beta1 if k == k1 else gamma[k + 1]
        if hi > ob[no]:
            oa[no] = 0.25 / a[k]
            ol[no] = -0.5 * b[k] / a[k]
            oc[no] = 0.25 * b[k] * b[k] / a[k] - c[k] - lam
            no += 1
            ob[no] = hi
    oa[no] = 0.0
    ol[no] = 0.0
    oc[no] = -g0
    no += 1
    ob[no] = beta2
    for k in range(k2, m):
        hi = gamma[k + 1]
        if hi > ob[no]:
            oa[no] = 0.25 / a[k]
            ol[no] = -0.5 * b[k] / a[k]
            oc[no] = 0.25 * b[k] * b[k] / a[k] - c[k] - lam
            no += 1
            ob[no] = hi
    if ob[no] != INF:
        raise InconsistentFunctionError("indicator plateau does not close on the right")
    return merge_identical(out_b[:no + 1].copy(), out_a[:no].copy(), out_l[:no].copy(),
                           out_c[:no].copy())


def minimize(breaks, quad, lin, cst, double lam, bint has_indicator, double shift=0.0):
    cdef double[::1] t = _f64(breaks), qa = _f64(quad), qb = _f64(lin), qc = _f64(cst)
    cdef Py_ssize_t n = qa.shape[0], k, best = 0, ntie = 0
    cdef double bk, x, v, best_v = INF, best_t = 0.0, zero_v, tol
    xs = np.empty(n)
    vs = np.empty(n)
    cdef double[::1] xv = xs, vv = vs
    for k in range(n):
        bk = qb[k] + shift
        x = -bk / (2.0 * qa[k])
        x = _fmin(_fmax(x, t[k]), t[k + 1])
        v = (qa[k] * x + bk) * x + qc[k]
        if has_indicator:
            v = v + lam
        xv[k] = x
        vv[k] = v
        if v < best_v or k == 0:
            best_v = v
            best = k
    best_t = xv[best]
    zero_v = qc[_zero_piece(&t[0], n)]
    tol = 1e-10 * (1.0 + fabs(best_v))
    if zero_v <= best_v + tol:
        return 0.0, float(zero_v)
    for k in range(n):
        if vv[k] <= best_v + tol:
            ntie += 1
            if fabs(xv[k]) < fabs(best_t) or (fabs(xv[k]) == fabs(best_t) and xv[k] < best_t):
                best_t = xv[k]
    if ntie > 1:
        # first index with the winning key, as a stable sort would pick
        for k in range(n):
            if vv[k] <= best_v + tol and xv[k] == best_t:
                return float(xv[k]), float(vv[k])
    return float(best_t), float(best_v)
