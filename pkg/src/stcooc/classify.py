"""Multi-channel kernel SVM over per-video features.

Channels are compared by chi-squared distance (histograms: bovw, boc) or
Euclidean distance (hara, pcacooc; squared by default) and combined into one
exponential kernel

    K(x, y) = exp(-sum_c D_c(x, y) / Omega_c)

where Omega_c is the mean training distance of channel c.  The SVM is a
one-vs-one C-SVC on the precomputed kernel, solved per class pair by SMO
with maximal-violating-pair working-set selection.  A projected-gradient
dual solver (svm_dual_oracle) is kept as the independent reference for tiny
problems; distance matrices are built from explicit squared differences so
grams come out exactly symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .characterize import CHANNELS, ChannelFeatures

__all__ = [
    "ChannelConfig",
    "SvmModel",
    "PairwiseSvm",
    "EvalReport",
    "chi2_distance",
    "l2_distance",
    "fit_normalizers",
    "combined_kernel",
    "gram_matrix",
    "kernel_rows",
    "svm_train",
    "svm_predict",
    "svm_dual_oracle",
    "dual_objective",
    "evaluate",
]

_CHI2 = frozenset({"bovw", "boc"})


@dataclass(frozen=True)
class ChannelConfig:
    """Active channels, their distance kinds and fitted normalizers.

    Channels are kept in the canonical order bovw, boc, hara, pcacooc;
    histogram channels use chi2, the others (squared) L2.
    """

    channels: tuple = CHANNELS
    l2_squared: bool = True
    normalizers: tuple | None = None  # aligned with channels once fitted

    def __post_init__(self):
        chans = tuple(self.channels)
        unknown = [c for c in chans if c not in CHANNELS]
        if unknown:
            raise ValueError(f"unknown channels {unknown} (expected subset of {CHANNELS})")
        if len(set(chans)) != len(chans) or not chans:
            raise ValueError("channels must be a non-empty set without duplicates")
        chans = tuple(c for c in CHANNELS if c in chans)
        object.__setattr__(self, "channels", chans)
        if self.normalizers is not None:
            om = tuple(float(v) for v in self.normalizers)
            if len(om) != len(chans):
                raise ValueError("one normalizer per active channel required")
            if any(not np.isfinite(v) or v <= 0 for v in om):
                raise ValueError("normalizers must be positive and finite")
            object.__setattr__(self, "normalizers", om)

    def distance_kind(self, channel) -> str:
        return "chi2" if channel in _CHI2 else "l2"

    def normalizer(self, channel) -> float:
        if self.normalizers is None:
            raise ValueError("normalizers have not been fitted")
        return self.normalizers[self.channels.index(channel)]

    def with_normalizers(self, omegas: dict) -> "ChannelConfig":
        missing = [c for c in self.channels if c not in omegas]
        if missing:
            raise ValueError(f"missing normalizers for channels {missing}")
        return replace(self, normalizers=tuple(float(omegas[c]) for c in self.channels))


# ---------------------------------------------------------------------------
# Channel distances


def chi2_distance(h1, h2) -> float:
    """(1/2) sum (h1-h2)^2 / (h1+h2), skipping bins with zero total mass."""
    a = np.asarray(h1, np.float64)
    b = np.asarray(h2, np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"histograms must be 1-d with equal length ({a.shape} vs {b.shape})")
    if a.size and (a.min() < 0 or b.min() < 0):
        raise ValueError("histograms must be non-negative")
    return float(_chi2_matrix(a[None, :], b[None, :])[0, 0])


def l2_distance(v1, v2, squared=True) -> float:
    """Euclidean distance, squared by default (the kernel's RBF form)."""
    a = np.asarray(v1, np.float64)
    b = np.asarray(v2, np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vectors must be 1-d with equal length ({a.shape} vs {b.shape})")
    return float(_l2_matrix(a[None, :], b[None, :], squared)[0, 0])


def _chi2_matrix(a, b, chunk=256):
    out = np.empty((a.shape[0], b.shape[0]), np.float64)
    for lo in range(0, a.shape[0], chunk):
        diff = a[lo:lo + chunk, None, :] - b[None, :, :]
        den = a[lo:lo + chunk, None, :] + b[None, :, :]
        term = np.zeros_like(diff)
        np.divide(diff * diff, den, out=term, where=den > 0)
        out[lo:lo + chunk] = 0.5 * term.sum(axis=2)
    return out

def _l2_matrix(a, b, squared, chunk=256):
    out = np.empty((a.shape[0], b.shape[0]), np.float64)
    for lo in range(0, a.shape[0], chunk):
        diff = a[lo:lo + chunk, None, :] - b[None, :, :]
        out[lo:lo + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out if squared else np.sqrt(out)


def _channel_matrix(feats_a, feats_b, channel, config):
    a = np.stack([f.vector(channel) for f in feats_a])
    b = np.stack([f.vector(channel) for f in feats_b])
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"channel {channel!r}: dimension mismatch {a.shape[1]} vs {b.shape[1]}")
    if config.distance_kind(channel) == "chi2":
        if (a.size and a.min() < 0) or (b.size and b.min() < 0):
            raise ValueError(f"channel {channel!r}: histograms must be non-negative")
        return _chi2_matrix(a, b)
    return _l2_matrix(a, b, config.l2_squared)


def fit_normalizers(features, config: ChannelConfig) -> dict:
    """Omega_c = mean channel distance over all unordered training pairs."""
    feats = tuple(features)
    if len(feats) < 2:
        raise ValueError(f"need at least 2 training videos to fit normalizers (got {len(feats)})")
    iu = np.triu_indices(len(feats), k=1)
    omegas = {}
    for ch in config.channels:
        d = _channel_matrix(feats, feats, ch, config)
        omega = float(d[iu].mean())
        if omega <= 0:
            raise ValueError(
                f"channel {ch!r} is degenerate: all training features identical (mean distance 0)"
            )
        omegas[ch] = omega
    return omegas


def combined_kernel(x: ChannelFeatures, y: ChannelFeatures, config: ChannelConfig) -> float:
    """exp(-sum over active channels of D_c(x, y) / Omega_c), in (0, 1]."""
    return float(kernel_rows([x], [y], config)[0, 0])


def kernel_rows(queries, train, config: ChannelConfig):
    """Combined-kernel values of each query against each training video."""
    q = tuple(queries)
    t = tuple(train)
    total = np.zeros((len(q), len(t)), np.float64)
    for ch in config.channels:
        total += _channel_matrix(q, t, ch, config) / config.normalizer(ch)
    return np.exp(-total)


def gram_matrix(features, config: ChannelConfig):
    """Training kernel matrix: exactly symmetric with unit diagonal."""
    feats = tuple(features)
    return kernel_rows(feats, feats, config)


# ---------------------------------------------------------------------------
# SMO solver (one-vs-one C-SVC on a precomputed kernel)

_TAU = 1e-12


def _smo_pair(kernel, y, c, tol, max_iter):
    """Two-class SMO, maximal-violating-pair selection; returns
    (alpha, rho, iterations, converged)."""
    n = y.size
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # gradient of (1/2) a'Qa - e'a at a = 0
    qd = np.ascontiguousarray(np.diag(kernel))
    iterations = 0
    converged = False
    while iterations < max_iter:
        yg = y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        neg = np.where(up, -yg, -np.inf)
        i = int(np.argmax(neg))
        pos = np.where(low, -yg, np.inf)
        j = int(np.argmin(pos))
        if neg[i] - pos[j] <= tol:
            converged = True
            break
        iterations += 1
        qi = y * (y[i] * kernel[:, i])
        qj = y * (y[j] * kernel[:, j])
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] - 2.0 * kernel[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * kernel[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        grad += qi * (alpha[i] - old_i) + qj * (alpha[j] - old_j)
    # rho per the standard free-SV average, else the violation midpoint
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if np.any(free):
        rho = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        ub = float(np.min(yg[up])) if np.any(up) else np.inf
        lb = float(np.max(yg[low])) if np.any(low) else -np.inf
        rho = (ub + lb) / 2.0
    return alpha, rho, iterations, converged


def dual_objective(kernel, y, alpha) -> float:
    """W(alpha) = sum(alpha) - (1/2) alpha' Q alpha (the maximized dual)."""
    q = (y[:, None] * y[None, :]) * kernel
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def _project_box_hyperplane(v, y, c):
    """Euclidean projection of v onto {0 <= a <= C, y.a = 0} (y entries +-1).

    The projection is clip(v - theta*y, 0, C) for the theta solving
    f(theta) = y.clip(v - theta*y, 0, C) = 0; f is piecewise linear and
    non-increasing, so the root is found exactly by scanning breakpoints.
    """
    bps = np.unique(np.concatenate([v * y, (v - c) * y]))
    fvals = np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, c) @ y
    k = int(np.searchsorted(-fvals, 0.0, side="left"))  # first f <= 0
    if k >= bps.size:
        theta = bps[-1]
    elif fvals[k] == 0.0 or k == 0:
        theta = bps[k]
    else:
        f0, f1 = fvals[k - 1], fvals[k]
        theta = bps[k - 1] + f0 * (bps[k] - bps[k - 1]) / (f0 - f1)
    return np.clip(v - theta * y, 0.0, c)


def svm_dual_oracle(kernel, y, c, iters=20000):
    """Reference dual solver: projected gradient ascent with exact projection
    onto {0 <= a <= C, y.a = 0}.  Returns (alpha, objective)."""
    kernel = np.asarray(kernel, np.float64)
    y = np.asarray(y, np.float64)
    n = y.size
    q = (y[:, None] * y[None, :]) * kernel
    lam = float(np.max(np.linalg.eigvalsh(q)))
    step = 1.0 / max(lam, 1.0)
    alpha = np.zeros(n)
    for _ in range(iters):
        alpha = _project_box_hyperplane(alpha + step * (1.0 - q @ alpha), y, c)
    return alpha, dual_objective(kernel, y, alpha)


@dataclass(frozen=True)
class PairwiseSvm:
    """One one-vs-one subproblem: decision(x) = sum coef_i K(x, train_i) + bias,
    positive for pos_class."""

    pos_class: str
    neg_class: str
    support_indices: np.ndarray  # indices into the training feature list
    dual_coef: np.ndarray  # alpha_i * y_i at the supports
    bias: float
    c: float
    iterations: int
    converged: bool

    def __post_init__(self):
        si = np.ascontiguousarray(np.asarray(self.support_indices, np.int64))
        dc = np.ascontiguousarray(np.asarray(self.dual_coef, np.float64))
        if si.ndim != 1 or dc.shape != si.shape:
            raise ValueError("support indices and dual coefficients must align")
        si.setflags(write=False)
        dc.setflags(write=False)
        object.__setattr__(self, "support_indices", si)
        object.__setattr__(self, "dual_coef", dc)


@dataclass(frozen=True)
class SvmModel:
    classes: tuple
    pairs: tuple
    n_train: int
    c: float
    tol: float
    max_iter: int


def svm_train(gram, labels, c=1.0, tol=1e-3, max_iter=100_000) -> SvmModel:
    """One-vs-one C-SVC on a precomputed kernel.

    Class pairs are formed over the sorted class list; within a pair the
    earlier class is the positive side.  Each subproblem runs SMO until the
    maximal KKT violation is <= tol (cap max_iter); resulting multipliers
    satisfy 0 <= alpha <= C and sum(alpha * y) = 0.
    """
    gram = np.asarray(gram, np.float64)
    labels = list(labels)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram matrix must be square")
    if gram.shape[0] != len(labels):
        raise ValueError(f"{len(labels)} labels for a {gram.shape[0]}-row gram matrix")
    if not np.array_equal(gram, gram.T):
        raise ValueError("gram matrix must be symmetric")
    if c <= 0:
        raise ValueError(f"C must be positive (got {c})")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError(f"need at least 2 classes (got {classes})")
    lab = np.asarray(labels, object)
    pairs = []
    for a in range(len(classes)):
        for b in range(a + 1, len(classes)):
            pos, neg = classes[a], classes[b]
            sub = np.flatnonzero((lab == pos) | (lab == neg))
            y = np.where(lab[sub] == pos, 1.0, -1.0)
            alpha, rho, iterations, converged = _smo_pair(
                gram[np.ix_(sub, sub)], y, float(c), float(tol), int(max_iter)
            )
            keep = alpha > 0
            pairs.append(PairwiseSvm(
                pos_class=pos,
                neg_class=neg,
                support_indices=sub[keep],
                dual_coef=(alpha * y)[keep],
                bias=-rho,
                c=float(c),
                iterations=iterations,
                converged=converged,
            ))
    return SvmModel(
        classes=classes,
        pairs=tuple(pairs),
        n_train=int(gram.shape[0]),
        c=float(c),
        tol=float(tol),
        max_iter=int(max_iter),
    )


def svm_predict(model: SvmModel, rows):
    """One-vs-one majority vote from kernel rows against the training set.

    A pair's decision > 0 votes for its positive (earlier) class, otherwise
    the negative one.  Vote ties go to the class with the largest summed
    |decision| over the pairs it won, then to the lowest class index.
    """
    rows = np.asarray(rows, np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.n_train:
        raise ValueError(f"kernel rows must be (n_queries, {model.n_train}), got {rows.shape}")
    nq = rows.shape[0]
    nc = len(model.classes)
    votes = np.zeros((nq, nc), np.int64)
    magnitude = np.zeros((nq, nc), np.float64)
    index = {cls: k for k, cls in enumerate(model.classes)}
    for pair in model.pairs:
        dec = rows[:, pair.support_indices] @ pair.dual_coef + pair.bias
        pos_win = dec > 0
        pi, ni = index[pair.pos_class], index[pair.neg_class]
        votes[pos_win, pi] += 1
        votes[~pos_win, ni] += 1
        magnitude[pos_win, pi] += np.abs(dec[pos_win])
        magnitude[~pos_win, ni] += np.abs(dec[~pos_win])
    out = []
    for qi in range(nq):
        cand = np.flatnonzero(votes[qi] == votes[qi].max())
        if cand.size > 1:
            mag = magnitude[qi, cand]
            cand = cand[mag == mag.max()]
        out.append(model.classes[cand[0]])
    return out


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalReport:
    """Accuracy summary: overall percent, per-class percents, confusion counts
    (rows = truth, columns = prediction, both in class order)."""

    overall: float
    per_class: tuple  # ((class, percent), ...) for classes with support
    confusion: np.ndarray
    classes: tuple
    split: str = ""

    def __post_init__(self):
        cm = np.ascontiguousarray(np.asarray(self.confusion, np.int64))
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] != len(self.classes):
            raise ValueError("confusion matrix must be square over the class list")
        cm.setflags(write=False)
        object.__setattr__(self, "confusion", cm)
        object.__setattr__(self, "per_class", tuple((str(c), float(v)) for c, v in self.per_class))
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))


def evaluate(predictions, truths, split="") -> EvalReport:
    """Overall accuracy is the support-weighted mean of per-class accuracies
    (equivalently, total correct / total)."""
    preds = list(predictions)
    truth = list(truths)
    if not preds or len(preds) != len(truth):
        raise ValueError(
            f"predictions and truths must be non-empty and equal-length "
            f"({len(preds)} vs {len(truth)})"
        )
    classes = tuple(sorted(set(truth) | set(preds)))
    index = {c: k for k, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), np.int64)
    for p, t in zip(preds, truth):
        confusion[index[t], index[p]] += 1
    support = confusion.sum(axis=1)
    per_class = tuple(
        (classes[k], 100.0 * confusion[k, k] / support[k])
        for k in range(len(classes))
        if support[k] > 0
    )
    overall = 100.0 * np.trace(confusion) / len(truth)
    return EvalReport(
        overall=float(overall),
        per_class=per_class,
        confusion=confusion,
        classes=classes,
        split=split,
    )
