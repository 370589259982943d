# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counting core for box-kernel co-occurrence correlograms.

Mirrors stcooc._cooc_py exactly: three-level grid traversal, closed-box bound
tests, interior cells aggregated, boundary cells point-tested, center removed
by the final diagonal decrement.  Integer results are identical to the pure
fallback and to brute-force enumeration.
"""

import numpy as np

from libc.math cimport floor


cdef inline Py_ssize_t _lower(const long long[::1] a, Py_ssize_t lo, Py_ssize_t hi,
                              long long v) noexcept nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _upper(const long long[::1] a, Py_ssize_t lo, Py_ssize_t hi,
                              long long v) noexcept nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def count_box_pairs(const double[::1] xs, const double[::1] ys, const double[::1] ts,
                    const long long[::1] labels,
                    const long long[::1] ux_vals, const long long[::1] ux_ptr,
                    const long long[::1] uy_vals, const long long[::1] uy_ptr,
                    const long long[::1] ut_vals, const long long[::1] ut_ptr,
                    double sx, double sy, double st,
                    const double[:, ::1] half, long long word_count):
    """Count, per kernel r and word pair (a, b), the b-points inside the
    closed box of half-extents half[r] around each a-center (center excluded
    via the final diagonal decrement).  Returns int64 (J, K, K)."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t nker = half.shape[0]
    cdef Py_ssize_t k = <Py_ssize_t>word_count
    out = np.zeros((nker, k, k), dtype=np.int64)
    cdef long long[:, :, ::1] C = out
    cdef Py_ssize_t m, r, u, v, p, a
    cdef Py_ssize_t u0, u1, v0, v1, c0, c1, ci0, ci1
    cdef double px, py, pt, hx, hy, ht
    cdef double xlo, xhi, ylo, yhi, tlo, thi
    cdef long long qxlo, qxhi, qylo, qyhi, qtlo, qthi
    cdef bint xin

    with nogil:
        for m in range(n):
            px = xs[m]
            py = ys[m]
            pt = ts[m]
            a = <Py_ssize_t>labels[m]
            for r in range(nker):
                hx = half[r, 0]
                hy = half[r, 1]
                ht = half[r, 2]
                xlo = px - hx
                xhi = px + hx
                ylo = py - hy
                yhi = py + hy
                tlo = pt - ht
                thi = pt + ht
                qxlo = <long long>floor(xlo / sx)
                qxhi = <long long>floor(xhi / sx)
                qylo = <long long>floor(ylo / sy)
                qyhi = <long long>floor(yhi / sy)
                qtlo = <long long>floor(tlo / st)
                qthi = <long long>floor(thi / st)
                u0 = _lower(ux_vals, 0, ux_vals.shape[0], qxlo)
                u1 = _upper(ux_vals, u0, ux_vals.shape[0], qxhi)
                for u in range(u0, u1):
                    xin = qxlo < ux_vals[u] < qxhi
                    v0 = _lower(uy_vals, ux_ptr[u], ux_ptr[u + 1], qylo)
                    v1 = _upper(uy_vals, v0, ux_ptr[u + 1], qyhi)
                    for v in range(v0, v1):
                        c0 = _lower(ut_vals, uy_ptr[v], uy_ptr[v + 1], qtlo)
                        c1 = _upper(ut_vals, c0, uy_ptr[v + 1], qthi)
                        if c0 == c1:
                            continue
                        if xin and qylo < uy_vals[v] < qyhi:
                            ci0 = _upper(ut_vals, c0, c1, qtlo)
                            ci1 = _lower(ut_vals, c0, c1, qthi)
                            if ci1 < ci0:
                                ci1 = ci0
                            for p in range(ut_ptr[c0], ut_ptr[ci0]):
                                if (xlo <= xs[p] <= xhi and ylo <= ys[p] <= yhi
                                        and tlo <= ts[p] <= thi):
                                    C[r, a, labels[p]] += 1
                            for p in range(ut_ptr[ci0], ut_ptr[ci1]):
                                C[r, a, labels[p]] += 1
                            for p in range(ut_ptr[ci1], ut_ptr[c1]):
                                if (xlo <= xs[p] <= xhi and ylo <= ys[p] <= yhi
                                        and tlo <= ts[p] <= thi):
                                    C[r, a, labels[p]] += 1
                        else:
                            for p in range(ut_ptr[c0], ut_ptr[c1]):
                                if (xlo <= xs[p] <= xhi and ylo <= ys[p] <= yhi
                                        and tlo <= ts[p] <= thi):
                                    C[r, a, labels[p]] += 1
                C[r, a, a] -= 1  # the center always lands in its own box
    return out
