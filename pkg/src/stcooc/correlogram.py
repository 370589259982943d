"""Spatio-temporal co-occurrence correlograms over labeled point clouds.

For each of J nested box kernels (half-extents in x, y, t) and each ordered
word pair (a, b), the correlogram stores the average number of b-labeled
points falling inside the kernel centered on an a-labeled point, the center
itself excluded:

    values[r, a, b] = (1 / |P_a|) * sum_{p in P_a} |{q != p : q in box_r(p), word(q) = b}|

Kernel membership is the closed box evaluated in bound form
(p - h <= q <= p + h, ties included).  Counting uses a three-level grid
index (cells sized by the smallest kernel, sorted unique-x -> unique-(x,y)
-> unique cells -> point runs): cells strictly inside a query box are
aggregated wholesale, boundary cells are point-tested.  Because the cell of
a coordinate is floor(v / cell_size) and floor is monotone, interior cells
can only contain in-box points and candidate cells cover every in-box point,
so indexed counts equal brute-force counts exactly - in integers - for
arbitrary float coordinates.  A brute-force enumerator is kept as the
independent second route.

The counting core is compiled (stcooc._cooc, Cython) when available, with a
pure-Python fallback (stcooc._cooc_py) selected at import; set STCOOC_PURE=1
to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datamodel import LabeledVideo

__all__ = [
    "KernelSet",
    "Correlogram",
    "CorrelogramElement",
    "make_kernels",
    "correlogram",
    "brute_force_correlogram",
    "local_histogram",
    "counting_backend",
]

from . import _cooc_py as _pure_backend

if os.environ.get("STCOOC_PURE"):
    _backend = _pure_backend
else:
    try:
        from . import _cooc as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _pure_backend


def counting_backend() -> str:
    """Name of the active counting core: 'compiled' or 'pure'."""
    return "pure" if _backend is _pure_backend else "compiled"


@dataclass(frozen=True)
class KernelSet:
    """Nested box kernels as (half_x, half_y, half_t) triples, innermost first."""

    half_extents: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        he = tuple(tuple(float(v) for v in k) for k in self.half_extents)
        if not he:
            raise ValueError("at least one kernel is required")
        for k in he:
            if len(k) != 3 or any(v <= 0 for v in k):
                raise ValueError(f"kernel half-extents must be three positive values, got {k}")
        for prev, cur in zip(he, he[1:]):
            if not all(c > p for p, c in zip(prev, cur)):
                raise ValueError(
                    f"kernels must strictly nest (each half-extent increasing): {prev} !< {cur}"
                )
        object.__setattr__(self, "half_extents", he)

    def __len__(self):
        return len(self.half_extents)


def make_kernels(j=5, spatial=(2, 40), temporal=(2, 60)) -> KernelSet:
    """Log-spaced integer kernel schedule from the inner to the outer radius.

    With j >= 2 the spatial and temporal half-extents run from lo to hi in
    geometric steps rounded to the nearest integer (both endpoints kept);
    j = 1 uses the outer radius alone.  Defaults give spatial
    (2, 4, 9, 19, 40) and temporal (2, 5, 11, 26, 60).
    """
    if j < 1:
        raise ValueError(f"kernel count must be >= 1 (got {j})")
    for name, (lo, hi) in (("spatial", spatial), ("temporal", temporal)):
        if not (1 <= lo < hi):
            raise ValueError(f"{name} range must satisfy 1 <= lo < hi, got ({lo}, {hi})")

    def schedule(lo, hi):
        if j == 1:
            return [int(hi)]
        vals = [int(np.rint(v)) for v in np.geomspace(lo, hi, j)]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(
                f"rounded schedule {vals} is not strictly increasing; "
                f"reduce j or widen the range"
            )
        return vals

    spat = schedule(*spatial)
    temp = schedule(*temporal)
    return KernelSet(tuple((s, s, t) for s, t in zip(spat, temp)))


@dataclass(frozen=True)
class Correlogram:
    """values[r, a, b]: average b-count around a-centers for kernel r (0-based
    array axes; words and kernels are 1-based in element/vector views)."""

    values: np.ndarray  # (J, K, K) float64
    kernels: KernelSet
    word_count: int

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, np.float64))
        j = len(self.kernels)
        k = int(self.word_count)
        if k < 1:
            raise ValueError("word_count must be >= 1")
        if v.shape != (j, k, k):
            raise ValueError(f"values shape {v.shape} != (J, K, K) = {(j, k, k)}")
        if not np.all(np.isfinite(v)) or v.size and v.min() < 0:
            raise ValueError("correlogram values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "word_count", k)

    def vector(self) -> np.ndarray:
        """Flatten in the fixed order index = ((a-1)K + (b-1))J + (r-1)."""
        return self.values.transpose(1, 2, 0).ravel()

    def elements(self):
        """CorrelogramElements enumerated in vectorization order."""
        j = len(self.kernels)
        k = self.word_count
        out = []
        for a in range(1, k + 1):
            for b in range(1, k + 1):
                for r in range(1, j + 1):
                    out.append(CorrelogramElement(r, a, b, float(self.values[r - 1, a - 1, b - 1])))
        return out


@dataclass(frozen=True)
class CorrelogramElement:
    """One correlogram entry: kernel r, center word a, neighbor word b (1-based)."""

    kernel: int
    word_a: int
    word_b: int
    value: float


# ---------------------------------------------------------------------------
# Shared plumbing


def _checked_inputs(video: LabeledVideo, kernels, word_count):
    if not isinstance(kernels, KernelSet):
        kernels = KernelSet(tuple(kernels))
    k = int(word_count)
    if k < 1:
        raise ValueError("word_count must be >= 1")
    n = video.n_points
    if n and video.labels.size != n:
        raise ValueError(f"video {video.video_id} is not word-labeled")
    if n and video.labels.max() > k:
        raise ValueError(
            f"video {video.video_id}: label {int(video.labels.max())} exceeds word count {k}"
        )
    labels0 = (video.labels - 1).astype(np.int64) if n else np.zeros(0, np.int64)
    return kernels, k, labels0


def _values_from_counts(counts, populations):
    """Divide per-center sums by |P_a|; words with no centers stay zero."""
    values = np.zeros(counts.shape, np.float64)
    nz = populations > 0
    values[:, nz, :] = counts[:, nz, :] / populations[nz][None, :, None]
    return values


def _build_index(xs, ys, ts, labels0, cell):
    """Sort points by (cell_x, cell_y, cell_t, label); return the three-level
    unique-prefix index consumed by both counting backends."""
    sx, sy, st = cell
    cx = np.floor(xs / sx).astype(np.int64)
    cy = np.floor(ys / sy).astype(np.int64)
    ct = np.floor(ts / st).astype(np.int64)
    order = np.lexsort((labels0, ct, cy, cx))
    xs_s = np.ascontiguousarray(xs[order])
    ys_s = np.ascontiguousarray(ys[order])
    ts_s = np.ascontiguousarray(ts[order])
    lab_s = np.ascontiguousarray(labels0[order])
    cxs, cys, cts = cx[order], cy[order], ct[order]
    n = xs_s.size
    change = np.ones(n, bool)
    change[1:] = (np.diff(cxs) != 0) | (np.diff(cys) != 0) | (np.diff(cts) != 0)
    cell_start = np.flatnonzero(change)
    ut_vals = np.ascontiguousarray(cts[cell_start])
    ut_ptr = np.ascontiguousarray(np.append(cell_start, n))
    ucx = cxs[cell_start]
    ucy = cys[cell_start]
    ncell = cell_start.size
    change = np.ones(ncell, bool)
    change[1:] = (np.diff(ucx) != 0) | (np.diff(ucy) != 0)
    xy_start = np.flatnonzero(change)
    uy_vals = np.ascontiguousarray(ucy[xy_start])
    uy_ptr = np.ascontiguousarray(np.append(xy_start, ncell))
    uucx = ucx[xy_start]
    nxy = xy_start.size
    change = np.ones(nxy, bool)
    change[1:] = np.diff(uucx) != 0
    x_start = np.flatnonzero(change)
    ux_vals = np.ascontiguousarray(uucx[x_start])
    ux_ptr = np.ascontiguousarray(np.append(x_start, nxy))
    return xs_s, ys_s, ts_s, lab_s, ux_vals, ux_ptr, uy_vals, uy_ptr, ut_vals, ut_ptr


# ---------------------------------------------------------------------------
# The two counting routes


def correlogram(video: LabeledVideo, kernels, word_count) -> Correlogram:
    """Grid-indexed correlogram of one labeled video (the fast route)."""
    kernels, k, labels0 = _checked_inputs(video, kernels, word_count)
    j = len(kernels)
    if video.n_points == 0:
        return Correlogram(np.zeros((j, k, k)), kernels, k)
    half = np.ascontiguousarray(np.asarray(kernels.half_extents, np.float64))
    sx, sy, st = kernels.half_extents[0]
    index = _build_index(video.xs, video.ys, video.ts, labels0, (sx, sy, st))
    counts = _backend.count_box_pairs(*index, sx, sy, st, half, k)
    populations = np.bincount(labels0, minlength=k)
    return Correlogram(_values_from_counts(counts, populations), kernels, k)


def brute_force_correlogram(video: LabeledVideo, kernels, word_count) -> Correlogram:
    """Per-center enumeration over all points: the independent slow route."""
    kernels, k, labels0 = _checked_inputs(video, kernels, word_count)
    j = len(kernels)
    n = video.n_points
    if n == 0:
        return Correlogram(np.zeros((j, k, k)), kernels, k)
    xs, ys, ts = video.xs, video.ys, video.ts
    counts = np.zeros((j, k, k), np.int64)
    for m in range(n):
        px, py, pt = float(xs[m]), float(ys[m]), float(ts[m])
        a = labels0[m]
        for r, (hx, hy, ht) in enumerate(kernels.half_extents):
            inside = (
                (xs >= px - hx) & (xs <= px + hx)
                & (ys >= py - hy) & (ys <= py + hy)
                & (ts >= pt - ht) & (ts <= pt + ht)
            )
            inside[m] = False
            counts[r, a] += np.bincount(labels0[inside], minlength=k)
    populations = np.bincount(labels0, minlength=k)
    return Correlogram(_values_from_counts(counts, populations), kernels, k)


def local_histogram(video: LabeledVideo, center_index, kernel, word_count) -> np.ndarray:
    """Word counts inside one kernel (half-extent triple) centered on point
    ``center_index``, the center excluded.  Returns an int64 (word_count,) vector."""
    kernels, k, labels0 = _checked_inputs(video, KernelSet((tuple(kernel),)), word_count)
    n = video.n_points
    if not 0 <= center_index < n:
        raise ValueError(f"center_index {center_index} outside 0..{n - 1}")
    hx, hy, ht = kernels.half_extents[0]
    px = float(video.xs[center_index])
    py = float(video.ys[center_index])
    pt = float(video.ts[center_index])
    inside = (
        (video.xs >= px - hx) & (video.xs <= px + hx)
        & (video.ys >= py - hy) & (video.ys <= py + hy)
        & (video.ts >= pt - ht) & (video.ts <= pt + ht)
    )
    inside[center_index] = False
    return np.bincount(labels0[inside], minlength=k).astype(np.int64)
