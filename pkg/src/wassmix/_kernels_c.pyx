# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the numerical hot kernels.

Mirrors ``wassmix._kernels`` function for function; see that module for the
semantics.  ``wassmix._backend`` prefers this module when it imported.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, M_SQRT1_2, NAN, erfc, exp, log

cnp.import_array()

BACKEND = "compiled"

DEF MAX_BISECT = 200
DEF MAX_WIDEN = 200


cdef inline double _norm_cdf(double z) noexcept nogil:
    return 0.5 * erfc(-z * M_SQRT1_2)


cdef inline double _mix_cdf(double x, const double* w, const double* mu,
                            const double* sd, Py_ssize_t K) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(K):
        acc += w[k] * _norm_cdf((x - mu[k]) / sd[k])
    return acc


def mixture_cdf_rows(cnp.ndarray x, cnp.ndarray w, cnp.ndarray mu, cnp.ndarray sd):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef Py_ssize_t N = xv.shape[0], L = xv.shape[1], K = wv.shape[1]
    out_arr = np.empty((N, L), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, l
    with nogil:
        for i in range(N):
            for l in range(L):
                out[i, l] = _mix_cdf(xv[i, l], &wv[i, 0], &mv[i, 0], &sv[i, 0], K)
    return out_arr


cdef inline double _bisect(double s, double lo, double hi, double xtol,
                           const double* w, const double* mu, const double* sd,
                           Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t it
    cdef double mid
    for it in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _mix_cdf(mid, w, mu, sd, K) >= s:
            hi = mid
        else:
            lo = mid
        if xtol > 0.0 and hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def mixture_quantiles_rows(cnp.ndarray levels, cnp.ndarray w, cnp.ndarray mu,
                           cnp.ndarray sd, double xtol=0.0):
    # levels must be ascending within each row (every caller passes sorted
    # levels); the solved midpoints then bound their neighbors' brackets,
    # which both narrows the search and forces a monotone output
    cdef const double[:, ::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef Py_ssize_t N = lv.shape[0], L = lv.shape[1], K = wv.shape[1]
    out_arr = np.empty((N, L), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    stack_idx_arr = np.empty((2 * L + 4, 2), dtype=np.intp)
    stack_x_arr = np.empty((2 * L + 4, 2), dtype=np.float64)
    cdef Py_ssize_t[:, ::1] stack_idx = stack_idx_arr
    cdef double[:, ::1] stack_x = stack_x_arr
    cdef Py_ssize_t i, k, it, top, a, b, m
    cdef double lo0, hi0, width, xlo, xhi, q
    with nogil:
        for i in range(N):
            if L == 0:
                continue
            lo0 = mv[i, 0] - 10.0 * sv[i, 0]
            hi0 = mv[i, 0] + 10.0 * sv[i, 0]
            for k in range(1, K):
                if mv[i, k] - 10.0 * sv[i, k] < lo0:
                    lo0 = mv[i, k] - 10.0 * sv[i, k]
                if mv[i, k] + 10.0 * sv[i, k] > hi0:
                    hi0 = mv[i, k] + 10.0 * sv[i, k]
            width = hi0 - lo0
            if width < 1.0:
                width = 1.0
            for it in range(MAX_WIDEN):
                if _mix_cdf(lo0, &wv[i, 0], &mv[i, 0], &sv[i, 0], K) <= lv[i, 0]:
                    break
                lo0 -= width
                width *= 2.0
            for it in range(MAX_WIDEN):
                if _mix_cdf(hi0, &wv[i, 0], &mv[i, 0], &sv[i, 0], K) >= lv[i, L - 1]:
                    break
                hi0 += width
                width *= 2.0
            top = 0
            stack_idx[0, 0] = 0
            stack_idx[0, 1] = L - 1
            stack_x[0, 0] = lo0
            stack_x[0, 1] = hi0
            while top >= 0:
                a = stack_idx[top, 0]
                b = stack_idx[top, 1]
                xlo = stack_x[top, 0]
                xhi = stack_x[top, 1]
                top -= 1
                if a > b:
                    continue
                m = a + (b - a) // 2
                q = _bisect(lv[i, m], xlo, xhi, xtol,
                            &wv[i, 0], &mv[i, 0], &sv[i, 0], K)
                out[i, m] = q
                if a <= m - 1:
                    top += 1
                    stack_idx[top, 0] = a
                    stack_idx[top, 1] = m - 1
                    stack_x[top, 0] = xlo
                    stack_x[top, 1] = q
                if m + 1 <= b:
                    top += 1
                    stack_idx[top, 0] = m + 1
                    stack_idx[top, 1] = b
                    stack_x[top, 0] = q
                    stack_x[top, 1] = xhi
            # ascending input levels plus shared brackets keep the row monotone
    return out_arr


def responsibilities_rows(cnp.ndarray t, cnp.ndarray w, cnp.ndarray mu, cnp.ndarray sd):
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef Py_ssize_t N = tv.shape[0], n = tv.shape[1], K = wv.shape[1]
    out_arr = np.empty((N, n, K), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double z, mx, tot, lp
    with nogil:
        for i in range(N):
            for j in range(n):
                mx = -INFINITY
                for k in range(K):
                    if wv[i, k] > 0.0:
                        z = (tv[i, j] - mv[i, k]) / sv[i, k]
                        lp = log(wv[i, k]) - log(sv[i, k]) - 0.5 * z * z
                    else:
                        lp = -INFINITY
                    out[i, j, k] = lp
                    if lp > mx:
                        mx = lp
                if mx == -INFINITY or mx != mx:
                    for k in range(K):
                        out[i, j, k] = NAN
                    continue
                tot = 0.0
                for k in range(K):
                    out[i, j, k] = exp(out[i, j, k] - mx)
                    tot += out[i, j, k]
                for k in range(K):
                    out[i, j, k] /= tot
    return out_arr


def weighted_quantiles(cnp.ndarray values, cnp.ndarray cum_weights, cnp.ndarray levels):
    cdef const double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] cw = np.ascontiguousarray(cum_weights, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], L = lv.shape[0]
    out_arr = np.empty(L, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t l, j = 0
    with nogil:
        for l in range(L):
            while j < n and cw[j] < lv[l] - 1e-9:
                j += 1
            out[l] = vv[j if j < n else n - 1]
    return out_arr


def best_split_column(cnp.ndarray xs, cnp.ndarray ys, Py_ssize_t min_leaf):
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t pos, best_pos = -1
    cdef double s_left = 0.0, total = 0.0, gain, best_gain = -INFINITY
    cdef double n_left, base
    if n < 2 * min_leaf:
        return -INFINITY, -1
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            total += yv[i]
        base = total * total / n
        for pos in range(n - min_leaf):
            s_left += yv[pos]
            if pos < min_leaf - 1:
                continue
            if xv[pos] >= xv[pos + 1]:
                continue
            n_left = pos + 1.0
            gain = (s_left * s_left / n_left
                    + (total - s_left) * (total - s_left) / (n - n_left)
                    - base)
            if gain > best_gain:
                best_gain = gain
                best_pos = pos
    return float(best_gain), int(best_pos)
