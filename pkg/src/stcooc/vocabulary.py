"""Video-word vocabularies: k-means construction and information-driven reduction.

Reduction greedily merges the pair of words whose fusion costs the least
mutual information I(words; classes).  For a merge of words i, j with priors
p_i, p_j and class-conditionals q_i, q_j the loss has the closed form

    I_before - I_after = (p_i + p_j) * JS_pi(q_i, q_j),   pi = p_i / (p_i + p_j)

(the class-marginal terms cancel), i.e. a prior-weighted Jensen-Shannon
divergence.  The reducer exploits the equivalent counts form
N * loss = G(r_i) + G(r_j) - G(r_i + r_j), G(v) = sum v*log2(v) - (sum v)*log2(sum v),
which vectorizes over candidate rows.

The trade-off factor scores a reduced vocabulary against its accuracy:
M = (1 - (reduced/original)^2) * rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeds import seed_key

__all__ = [
    "Vocabulary",
    "CountMatrix",
    "TradeoffRow",
    "kmeans",
    "build_vocabulary",
    "class_word_counts",
    "mutual_information",
    "merge_loss",
    "reduce_vocabulary",
    "reduction_schedule",
    "label_map",
    "tradeoff_factor",
]


@dataclass(frozen=True)
class Vocabulary:
    """K centroid descriptors; merged_from[k] = original 1-based word indices
    fused into current word k+1 (singletons for an unreduced vocabulary)."""

    centroids: np.ndarray
    merged_from: tuple[frozenset, ...]

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centroids, np.float64))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("centroids must be a non-empty (K, l) array")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        mf = tuple(frozenset(int(i) for i in s) for s in self.merged_from)
        if len(mf) != c.shape[0]:
            raise ValueError(f"merged_from has {len(mf)} entries for {c.shape[0]} centroids")
        if any(not s or min(s) < 1 for s in mf):
            raise ValueError("merged_from sets must be non-empty with 1-based indices")
        object.__setattr__(self, "merged_from", mf)

    @property
    def size(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    @classmethod
    def from_centroids(cls, centroids) -> "Vocabulary":
        c = np.asarray(centroids, np.float64)
        return cls(c, tuple(frozenset([i + 1]) for i in range(c.shape[0])))


@dataclass(frozen=True)
class CountMatrix:
    """Word-by-class occurrence counts over labeled training points."""

    counts: np.ndarray  # (K, C) int64
    row_words: tuple[int, ...]  # 1-based current word index per row
    col_classes: tuple[str, ...]

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.counts, np.int64))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("counts must be a non-empty (K, C) matrix")
        if c.min() < 0:
            raise ValueError("counts must be non-negative")
        if c.sum() <= 0:
            raise ValueError("count matrix must contain at least one observation")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        rw = tuple(int(w) for w in self.row_words)
        cc = tuple(str(s) for s in self.col_classes)
        if len(rw) != c.shape[0] or len(cc) != c.shape[1]:
            raise ValueError("row/column labels must match the matrix shape")
        object.__setattr__(self, "row_words", rw)
        object.__setattr__(self, "col_classes", cc)


@dataclass(frozen=True)
class TradeoffRow:
    """One sweep row; the factor is pinned to the defining formula at 1e-9."""

    reduced_size: int
    classification_rate: float
    m_factor: float
    orig_size: int

    def __post_init__(self):
        expect = tradeoff_factor(self.reduced_size, self.orig_size, self.classification_rate)
        if abs(self.m_factor - expect) > 1e-9:
            raise ValueError(
                f"m_factor {self.m_factor} inconsistent with formula value {expect} "
                f"for size {self.reduced_size}/{self.orig_size} at rate {self.classification_rate}"
            )


# ---------------------------------------------------------------------------
# k-means


def _assign(x, centers, chunk=1024):
    """Nearest-center assignment; exact squared distances, first-min ties."""
    n = x.shape[0]
    assign = np.empty(n, np.int64)
    d2 = np.empty(n, np.float64)
    for lo in range(0, n, chunk):
        diff = x[lo:lo + chunk, None, :] - centers[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        assign[lo:lo + chunk] = np.argmin(dist, axis=1)
        d2[lo:lo + chunk] = dist[np.arange(dist.shape[0]), assign[lo:lo + chunk]]
    return assign, d2


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    chosen = {first}
    diff = x - centers[0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:  # all mass on existing centers: take the lowest unused index
            idx = next(i for i in range(n) if i not in chosen)
        chosen.add(idx)
        centers[c] = x[idx]
        diff = x - centers[c]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centers


def kmeans(vectors, k, seed, max_iters=100, tol=1e-6):
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are re-seeded with the point currently farthest from its
    centroid (ascending cluster index, each point used once).  Stops when the
    relative inertia improvement drops to ``tol`` or after ``max_iters``.
    Returns (centroids, assignments, inertia), consistent as a triple.
    """
    x = np.ascontiguousarray(np.asarray(vectors, np.float64))
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("vectors must be a non-empty (n, l) array")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n} (got {k})")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    inertia = None
    for _ in range(max_iters):
        assign, d2 = _assign(x, centers)
        occupancy = np.bincount(assign, minlength=k)
        for c in np.flatnonzero(occupancy == 0):
            far = int(np.argmax(d2))
            centers = centers.copy()
            centers[c] = x[far]
            occupancy[assign[far]] -= 1
            assign[far] = c
            occupancy[c] = 1
            d2[far] = 0.0
        new_inertia = float(d2.sum())
        if inertia is not None and inertia - new_inertia <= tol * inertia:
            inertia = new_inertia
            break
        inertia = new_inertia
        sums = np.zeros((k, x.shape[1]), np.float64)
        np.add.at(sums, assign, x)
        occ = np.bincount(assign, minlength=k)
        centers = centers.copy()
        upd = occ > 0  # a cluster emptied by re-seeding keeps its center one round
        centers[upd] = sums[upd] / occ[upd, None]
    assign, d2 = _assign(x, centers)
    return centers, assign, float(d2.sum())


def build_vocabulary(dataset, k=1000, sample_size=100_000, seed=0):
    """Pool descriptors across videos (uniform subsample above ``sample_size``)
    and cluster them into a k-word vocabulary."""
    videos = dataset.videos if hasattr(dataset, "videos") else tuple(dataset)
    pools = [v.descriptors for v in videos if v.n_points]
    if not pools:
        raise ValueError("no descriptors to build a vocabulary from")
    pool = np.concatenate(pools, axis=0)
    if pool.shape[0] < k:
        raise ValueError(f"only {pool.shape[0]} descriptors pooled but k={k}")
    if sample_size is not None and pool.shape[0] > sample_size:
        rng = np.random.default_rng(seed_key(seed, 0))
        idx = rng.choice(pool.shape[0], size=sample_size, replace=False)
        idx.sort()
        pool = pool[idx]
    centers, _, _ = kmeans(pool, k, seed=seed_key(seed, 1))
    return Vocabulary.from_centroids(centers)


# ---------------------------------------------------------------------------
# Mutual information and greedy merging


def class_word_counts(videos, vocab_size) -> "CountMatrix":
    """Point-level word-by-class counts over labeled, classed videos.

    Row k holds word k+1; columns are the sorted class names.
    """
    vids = tuple(videos.videos if hasattr(videos, "videos") else videos)
    classes = sorted({v.action_class for v in vids if v.action_class is not None})
    if not classes:
        raise ValueError("no videos carry an action class")
    col = {c: j for j, c in enumerate(classes)}
    counts = np.zeros((vocab_size, len(classes)), np.int64)
    for v in vids:
        if v.action_class is None:
            raise ValueError(f"video {v.video_id} has no action class")
        if v.n_points == 0:
            continue
        if not v.is_labeled or v.labels.size != v.n_points:
            raise ValueError(f"video {v.video_id} is not word-labeled")
        if v.labels.max() > vocab_size:
            raise ValueError(
                f"video {v.video_id}: label {int(v.labels.max())} exceeds vocabulary size {vocab_size}"
            )
        counts[:, col[v.action_class]] += np.bincount(v.labels - 1, minlength=vocab_size)
    return CountMatrix(counts, tuple(range(1, vocab_size + 1)), tuple(classes))


def mutual_information(cm: CountMatrix) -> float:
    """I(words; classes) in bits of the joint distribution counts/total."""
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    p = counts / total
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    outer = px[:, None] * py[None, :]
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / outer[nz])))


def merge_loss(cm: CountMatrix, i: int, j: int) -> float:
    """Information lost by fusing rows i and j (0-based row indices):
    (p_i + p_j) * JS_pi(q_i, q_j) with pi = p_i / (p_i + p_j)."""
    k = cm.counts.shape[0]
    if not (0 <= i < k and 0 <= j < k) or i == j:
        raise ValueError(f"need two distinct row indices in 0..{k - 1}, got ({i}, {j})")
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    si = counts[i].sum()
    sj = counts[j].sum()
    if si + sj == 0:
        return 0.0
    pi = si / total
    pj = sj / total
    w = pi / (pi + pj)
    qi = counts[i] / si if si > 0 else np.zeros(cm.counts.shape[1])
    qj = counts[j] / sj if sj > 0 else np.zeros(cm.counts.shape[1])
    mix = w * qi + (1.0 - w) * qj

    def kl(q):
        nz = q > 0
        return float(np.sum(q[nz] * np.log2(q[nz] / mix[nz])))

    js = 0.0
    if si > 0:
        js += w * kl(qi)
    if sj > 0:
        js += (1.0 - w) * kl(qj)
    return (pi + pj) * js


def _xlog2x(a):
    out = np.zeros_like(a, np.float64)
    np.log2(a, out=out, where=a > 0)
    return a * out


def _g(rows):
    """G(v) = sum v log2 v - (sum v) log2(sum v), rowwise over a 2-d array."""
    rows = np.atleast_2d(rows)
    return _xlog2x(rows).sum(axis=1) - _xlog2x(rows.sum(axis=1))


def reduction_schedule(vocab: Vocabulary, cm: CountMatrix, sizes):
    """Snapshots of the greedy merge sequence at each requested size.

    The merge order is independent of the stopping size, so the snapshots
    nest: every smaller vocabulary arises from the larger ones by further
    merges.  Returns (dict size -> Vocabulary, loss trace down to min(sizes)).
    """
    k0 = vocab.size
    if cm.counts.shape[0] != k0:
        raise ValueError(f"count matrix has {cm.counts.shape[0]} rows for vocabulary size {k0}")
    want = sorted({int(s) for s in sizes}, reverse=True)
    if not want:
        raise ValueError("at least one snapshot size is required")
    if want[0] > k0 or want[-1] < 1:
        raise ValueError(f"snapshot sizes must be in 1..{k0} (got {want})")
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    g = _g(counts)
    loss = np.full((k0, k0), np.inf)
    for i in range(k0 - 1):
        loss[i, i + 1:] = (g[i] + g[i + 1:] - _g(counts[i] + counts[i + 1:])) / total
    alive = np.ones(k0, bool)
    centroids = vocab.centroids.astype(np.float64).copy()
    merged = [set(s) for s in vocab.merged_from]
    trace = []
    snapshots = {}

    def snapshot():
        keep = np.flatnonzero(alive)
        return Vocabulary(centroids[keep], tuple(frozenset(merged[i]) for i in keep))

    if want[0] == k0:
        snapshots[k0] = snapshot()
    for step in range(k0 - want[-1]):
        flat = int(np.argmin(loss))
        i, j = divmod(flat, k0)
        trace.append(float(loss[i, j]))
        counts[i] += counts[j]
        centroids[i] = (centroids[i] + centroids[j]) / 2.0
        merged[i] |= merged[j]
        alive[j] = False
        loss[j, :] = np.inf
        loss[:, j] = np.inf
        g[i] = _g(counts[i])[0]
        others = np.flatnonzero(alive)
        others = others[others != i]
        if others.size:
            lv = (g[i] + g[others] - _g(counts[i] + counts[others])) / total
            below = others < i
            loss[others[below], i] = lv[below]
            loss[i, others[~below]] = lv[~below]
        size_now = k0 - step - 1
        if size_now in want:
            snapshots[size_now] = snapshot()
    return snapshots, tuple(trace)


def reduce_vocabulary(vocab: Vocabulary, cm: CountMatrix, target_size: int):
    """Greedily merge minimum-loss word pairs down to ``target_size``.

    Each step fuses the current pair (i, j), i < j, with the smallest loss
    (ties: lexicographically smallest pair); the fused centroid is the plain
    average of the two, the fused count row their sum, and the loss is
    appended to the returned trace.  Returns (reduced Vocabulary, trace).
    """
    if not 1 <= target_size <= vocab.size:
        raise ValueError(f"target_size must be in 1..{vocab.size} (got {target_size})")
    snapshots, trace = reduction_schedule(vocab, cm, [target_size])
    return snapshots[target_size], trace


def label_map(vocab: Vocabulary, orig_size=None) -> np.ndarray:
    """Array mapping original 1-based word ids to their current (merged) id.

    Entry 0 is unused; ``orig_size`` defaults to the largest original id seen.
    """
    top = max(max(s) for s in vocab.merged_from)
    if orig_size is None:
        orig_size = top
    elif orig_size < top:
        raise ValueError(f"orig_size {orig_size} smaller than largest merged id {top}")
    out = np.zeros(orig_size + 1, np.int64)
    for current, sources in enumerate(vocab.merged_from, start=1):
        for orig in sources:
            if out[orig]:
                raise ValueError(f"original word {orig} claimed by two merged words")
            out[orig] = current
    if np.count_nonzero(out[1:]) != orig_size:
        missing = int(np.flatnonzero(out[1:] == 0)[0]) + 1
        raise ValueError(f"original word {missing} not covered by any merged word")
    return out


# ---------------------------------------------------------------------------
# Trade-off factor


def tradeoff_factor(reduced_size, orig_size, classification_rate) -> float:
    """M = (1 - (reduced/original)^2) * rate: rewards small vocabularies,
    scaled by the accuracy they retain."""
    if orig_size < 1 or not 0 < reduced_size <= orig_size:
        raise ValueError(
            f"sizes must satisfy 0 < reduced <= original (got {reduced_size}, {orig_size})"
        )
    if not 0.0 <= classification_rate <= 100.0:
        raise ValueError(f"classification_rate must be a percentage in [0, 100] (got {classification_rate})")
    ratio = reduced_size / orig_size
    return (1.0 - ratio * ratio) * classification_rate
