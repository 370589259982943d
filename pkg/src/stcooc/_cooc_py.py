"""Pure-Python counting core: fallback for the compiled stcooc._cooc.

Same inputs, same traversal, same integer results as the Cython extension.
Works on plain lists + bisect to stay out of numpy-scalar overhead; interior
cell runs are aggregated with Counter so the fallback remains usable on
desk-scale corpora (the extension is still ~an order of magnitude faster,
see benchmarks/bench_backends.py).
"""

from bisect import bisect_left, bisect_right
from collections import Counter
from math import floor

import numpy as np


def count_box_pairs(xs, ys, ts, labels, ux_vals, ux_ptr, uy_vals, uy_ptr,
                    ut_vals, ut_ptr, sx, sy, st, half, word_count):
    """Count, per kernel r and word pair (a, b), the b-points inside the
    closed box of half-extents half[r] around each a-center (center excluded
    via the final diagonal decrement).  Returns int64 (J, K, K)."""
    n = len(xs)
    nker = len(half)
    k = int(word_count)
    X = xs.tolist()
    Y = ys.tolist()
    T = ts.tolist()
    L = labels.tolist()
    UX = ux_vals.tolist()
    PX = ux_ptr.tolist()
    UY = uy_vals.tolist()
    PY = uy_ptr.tolist()
    UT = ut_vals.tolist()
    PT = ut_ptr.tolist()
    H = [tuple(row) for row in np.asarray(half, float).tolist()]
    C = [[[0] * k for _ in range(k)] for _ in range(nker)]

    def sweep_points(row, p0, p1, xlo, xhi, ylo, yhi, tlo, thi):
        for p in range(p0, p1):
            if xlo <= X[p] <= xhi and ylo <= Y[p] <= yhi and tlo <= T[p] <= thi:
                row[L[p]] += 1

    for m in range(n):
        px = X[m]
        py = Y[m]
        pt = T[m]
        a = L[m]
        for r in range(nker):
            hx, hy, ht = H[r]
            xlo = px - hx
            xhi = px + hx
            ylo = py - hy
            yhi = py + hy
            tlo = pt - ht
            thi = pt + ht
            qxlo = floor(xlo / sx)
            qxhi = floor(xhi / sx)
            qylo = floor(ylo / sy)
            qyhi = floor(yhi / sy)
            qtlo = floor(tlo / st)
            qthi = floor(thi / st)
            row = C[r][a]
            u0 = bisect_left(UX, qxlo)
            u1 = bisect_right(UX, qxhi, u0)
            for u in range(u0, u1):
                xin = qxlo < UX[u] < qxhi
                v0 = bisect_left(UY, qylo, PX[u], PX[u + 1])
                v1 = bisect_right(UY, qyhi, v0, PX[u + 1])
                for v in range(v0, v1):
                    c0 = bisect_left(UT, qtlo, PY[v], PY[v + 1])
                    c1 = bisect_right(UT, qthi, c0, PY[v + 1])
                    if c0 == c1:
                        continue
                    if xin and qylo < UY[v] < qyhi:
                        ci0 = bisect_right(UT, qtlo, c0, c1)
                        ci1 = bisect_left(UT, qthi, c0, c1)
                        if ci1 < ci0:
                            ci1 = ci0
                        if ci0 > c0:
                            sweep_points(row, PT[c0], PT[ci0], xlo, xhi, ylo, yhi, tlo, thi)
                        if ci1 > ci0:
                            for lab, cnt in Counter(L[PT[ci0]:PT[ci1]]).items():
                                row[lab] += cnt
                        if c1 > ci1:
                            sweep_points(row, PT[ci1], PT[c1], xlo, xhi, ylo, yhi, tlo, thi)
                    else:
                        sweep_points(row, PT[c0], PT[c1], xlo, xhi, ylo, yhi, tlo, thi)
            row[a] -= 1  # the center always lands in its own box
    return np.asarray(C, np.int64)
