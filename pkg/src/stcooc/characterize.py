"""Per-video feature channels derived from labels and correlograms.

Four channels characterize a video:

- ``bovw``    word-occurrence histogram, L1-normalized;
- ``boc``     bag of correlations: each of the K*^2 word-pair profiles (the
              J-vector of correlogram values across kernels) votes for its
              nearest fitted profile center, histogram L1-normalized;
- ``hara``    13 Haralick texture measures of each kernel slice, concatenated
              (13*J values, log base 2, 0*log 0 := 0);
- ``pcacooc`` the full correlogram vector projected onto a fitted PCA basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlogram import Correlogram
from .vocabulary import kmeans

__all__ = [
    "CHANNELS",
    "ChannelFeatures",
    "Correlations",
    "PcaModel",
    "bovw",
    "correlation_profiles",
    "fit_correlations",
    "boc",
    "haralick_slice",
    "haralick_vector",
    "fit_pca",
    "pca_cooc",
]

CHANNELS = ("bovw", "boc", "hara", "pcacooc")


@dataclass(frozen=True)
class ChannelFeatures:
    """One video's feature vectors keyed by channel name."""

    video_id: str
    channels: dict

    def __post_init__(self):
        clean = {}
        for name, vec in self.channels.items():
            if name not in CHANNELS:
                raise ValueError(f"unknown channel {name!r} (expected one of {CHANNELS})")
            v = np.ascontiguousarray(np.asarray(vec, np.float64))
            if v.ndim != 1:
                raise ValueError(f"channel {name!r} must be a 1-d vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            v.setflags(write=False)
            clean[name] = v
        object.__setattr__(self, "channels", clean)

    def vector(self, name) -> np.ndarray:
        if name not in self.channels:
            raise KeyError(f"video {self.video_id} has no channel {name!r}")
        return self.channels[name]

    @property
    def dims(self) -> dict:
        return {name: v.size for name, v in self.channels.items()}


def bovw(video, k_star) -> np.ndarray:
    """L1-normalized histogram of word labels; zero vector for empty videos."""
    k = int(k_star)
    if k < 1:
        raise ValueError("k_star must be >= 1")
    n = video.n_points
    if n == 0:
        return np.zeros(k)
    if video.labels.size != n:
        raise ValueError(f"video {video.video_id} is not word-labeled")
    if video.labels.max() > k:
        raise ValueError(f"video {video.video_id}: label exceeds vocabulary size {k}")
    return np.bincount(video.labels - 1, minlength=k) / n


# ---------------------------------------------------------------------------
# Bag of correlations


@dataclass(frozen=True)
class Correlations:
    """Q fitted profile centers, each a J-vector across kernel sizes."""

    centers: np.ndarray  # (Q, J)

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centers, np.float64))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("centers must be a non-empty (Q, J) array")
        if not np.all(np.isfinite(c)):
            raise ValueError("centers must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def q(self) -> int:
        return int(self.centers.shape[0])

    @property
    def kernel_count(self) -> int:
        return int(self.centers.shape[1])


def correlation_profiles(cg: Correlogram) -> np.ndarray:
    """The K*^2 per-word-pair profiles (rows) across the J kernels (columns),
    in vectorization order of the pairs."""
    k = cg.word_count
    j = len(cg.kernels)
    return cg.values.transpose(1, 2, 0).reshape(k * k, j)


def fit_correlations(correlograms, q, seed) -> Correlations:
    """Cluster all training profiles into q centers (k-means, deterministic
    under seed).  Accepts a sequence of Correlograms or a prebuilt (G, J)
    profile array."""
    if isinstance(correlograms, np.ndarray):
        profiles = np.asarray(correlograms, np.float64)
    else:
        mats = [correlation_profiles(cg) for cg in correlograms]
        if not mats:
            raise ValueError("no training correlograms given")
        widths = {m.shape[1] for m in mats}
        if len(widths) != 1:
            raise ValueError(f"inconsistent kernel counts across correlograms: {sorted(widths)}")
        profiles = np.concatenate(mats, axis=0)
    if profiles.ndim != 2 or profiles.shape[0] < 1:
        raise ValueError("profiles must form a non-empty (G, J) array")
    g = profiles.shape[0]
    if not 1 <= q <= g:
        raise ValueError(f"q must be in 1..{g} (G = number of pooled profiles), got {q}")
    centers, _, _ = kmeans(profiles, q, seed=seed)
    return Correlations(centers)


def boc(cg: Correlogram, u: Correlations) -> np.ndarray:
    """Nearest-center vote of each word-pair profile, L1-normalized over Q bins
    (ties go to the lowest center index)."""
    profiles = correlation_profiles(cg)
    if profiles.shape[1] != u.kernel_count:
        raise ValueError(
            f"correlogram has {profiles.shape[1]} kernels but centers expect {u.kernel_count}"
        )
    g = profiles.shape[0]
    assign = np.empty(g, np.int64)
    chunk = 2048
    for lo in range(0, g, chunk):
        diff = profiles[lo:lo + chunk, None, :] - u.centers[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        assign[lo:lo + chunk] = np.argmin(d2, axis=1)
    return np.bincount(assign, minlength=u.q) / g


# ---------------------------------------------------------------------------
# Haralick texture measures


def haralick_slice(m) -> np.ndarray:
    """The 13 Haralick measures of one co-occurrence matrix.

    The matrix is normalized to a distribution P = m / sum(m) first (an
    all-zero matrix yields 13 zeros, and any positive rescaling of m leaves
    the output unchanged).  Levels are 1-based; entropies use log base 2 with
    0*log 0 := 0; the sum variance f7 is centered on the sum average f6
    (correcting the well-known misprint that centers it on f8); f3 := 0 when
    a marginal is degenerate and f12 := 0 when max(HX, HY) = 0.
    """
    m = np.asarray(m, np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError("input must be a square 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("input contains non-finite entries")
    if m.min() < 0:
        raise ValueError("input contains negative entries")
    total = m.sum()
    if total == 0:
        return np.zeros(13)
    p = m / total
    k = p.shape[0]
    levels = np.arange(1, k + 1, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float(levels @ px)
    mu_y = float(levels @ py)
    var_x = float((levels - mu_x) ** 2 @ px)
    var_y = float((levels - mu_y) ** 2 @ py)

    idx = np.arange(k)
    p_sum = np.bincount(np.add.outer(idx, idx).ravel(), weights=p.ravel(), minlength=2 * k - 1)
    sum_levels = np.arange(2, 2 * k + 1, dtype=np.float64)  # i + j with 1-based levels
    p_diff = np.bincount(np.abs(np.subtract.outer(idx, idx)).ravel(), weights=p.ravel(), minlength=k)
    diff_levels = np.arange(k, dtype=np.float64)

    def ent(dist):
        nz = dist > 0
        return float(-(dist[nz] @ np.log2(dist[nz])))

    f1 = float((p * p).sum())
    f2 = float(diff_levels ** 2 @ p_diff)
    cross = float(levels @ p @ levels)  # sum_ij i*j*p_ij
    sd = np.sqrt(var_x) * np.sqrt(var_y)
    f3 = (cross - mu_x * mu_y) / sd if sd > 0 else 0.0
    f4 = var_x
    f5 = float(np.sum(p / (1.0 + np.subtract.outer(levels, levels) ** 2)))
    f6 = float(sum_levels @ p_sum)
    f7 = float((sum_levels - f6) ** 2 @ p_sum)
    f8 = ent(p_sum)
    f9 = ent(p.ravel())
    mu_d = float(diff_levels @ p_diff)
    f10 = float((diff_levels - mu_d) ** 2 @ p_diff)
    f11 = ent(p_diff)
    hx = ent(px)
    hy = ent(py)
    outer = px[:, None] * py[None, :]
    nz = p > 0
    hxy1 = float(-(p[nz] @ np.log2(outer[nz])))
    hxy2 = ent(outer.ravel())
    denom = max(hx, hy)
    f12 = (f9 - hxy1) / denom if denom > 0 else 0.0
    f13 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - f9)))))
    return np.array([f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13])


def haralick_vector(cg: Correlogram) -> np.ndarray:
    """haralick_slice of each kernel's K*xK* slice, concatenated in kernel order."""
    return np.concatenate([haralick_slice(cg.values[r]) for r in range(len(cg.kernels))])


# ---------------------------------------------------------------------------
# PCA over correlogram vectors


@dataclass(frozen=True)
class PcaModel:
    """Orthonormal basis of the top-S covariance eigendirections."""

    mean: np.ndarray  # (D,)
    basis: np.ndarray  # (S, D), rows orthonormal
    explained_variances: np.ndarray  # (S,), non-increasing
    n_train: int

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, np.float64))
        basis = np.ascontiguousarray(np.asarray(self.basis, np.float64))
        ev = np.ascontiguousarray(np.asarray(self.explained_variances, np.float64))
        if mean.ndim != 1 or basis.ndim != 2 or basis.shape[1] != mean.size:
            raise ValueError("basis must be (S, D) matching the mean's dimension")
        if ev.shape != (basis.shape[0],):
            raise ValueError("one explained variance per basis vector required")
        if ev.size and (np.any(ev < -1e-12) or np.any(np.diff(ev) > 1e-12)):
            raise ValueError("explained variances must be non-negative and non-increasing")
        for a in (mean, basis, ev):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "explained_variances", ev)

    @property
    def s(self) -> int:
        return int(self.basis.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.mean.size)


def fit_pca(vectors, s) -> PcaModel:
    """Top-s principal directions of the training vectors.

    s is capped by n_train - 1, the rank bound of a sample covariance from
    n_train points.  Computed via thin SVD of the centered data (identical to
    the covariance eigendecomposition, stabler when n_train <= D); each basis
    vector's sign is fixed so its largest-magnitude component is positive.
    """
    x = np.asarray(vectors, np.float64)
    if x.ndim != 2:
        raise ValueError("training vectors must form a 2-d array")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 training vectors (got {n})")
    if not 1 <= s <= n - 1:
        raise ValueError(
            f"requested component count S={s} exceeds the maximum admissible "
            f"n_train - 1 = {n - 1} (covariance rank limit)"
            if s > n - 1 else f"component count S must be >= 1 (got {s})"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    _, sing, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:s].copy()
    variances = (sing[:s] ** 2) / (n - 1)
    for r in range(basis.shape[0]):
        lead = int(np.argmax(np.abs(basis[r])))
        if basis[r, lead] < 0:
            basis[r] = -basis[r]
    return PcaModel(mean=mean, basis=basis, explained_variances=variances, n_train=n)


def pca_cooc(cg: Correlogram, model: PcaModel) -> np.ndarray:
    """Centered correlogram vector projected onto the model's basis."""
    vec = cg.vector()
    if vec.size != model.input_dim:
        raise ValueError(
            f"correlogram vector has dimension {vec.size} but the model expects {model.input_dim}"
        )
    return (vec - model.mean) @ model.basis.T
