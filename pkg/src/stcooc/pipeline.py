"""End-to-end orchestration: fit on labeled videos, featurize and predict new
ones, cross-validate, and sweep vocabulary sizes for the accuracy/size
trade-off.

Fitting runs vocabulary construction, information-driven reduction, point
labeling, correlogram computation, per-channel model fitting (correlation
centers, PCA basis), kernel normalizers, and finally the one-vs-one SVM.
Every random stage draws from a seed key derived from (seed, stage tag), so a
run is a pure function of (data, config, seed).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import characterize, classify, vocabulary as vocab_mod
from ._seeds import seed_key
from .config import PipelineConfig, SplitConfig
from .correlogram import correlogram, make_kernels
from .datamodel import Dataset, label_points
from .errors import ConfigError, StcoocError

__all__ = [
    "FeatureExtractor",
    "FittedPipeline",
    "fit_pipeline",
    "featurize",
    "predict_videos",
    "make_folds",
    "cross_validate",
    "sweep_tradeoff",
]

# Stage tags for seed keys (synthetic data uses its own scheme).
_TAG_VOCAB = 1
_TAG_CORRELATIONS = 2
_TAG_FOLDS = 3
_TAG_CGRID = 4
_TAG_FOLD_FIT = 5
_TAG_SWEEP_FIT = 6


@contextmanager
def _stage(name):
    """Prefix stage names onto generic errors so failures say where they arose."""
    try:
        yield
    except (ConfigError, StcoocError):
        raise
    except ValueError as exc:
        raise ValueError(f"fit stage {name!r}: {exc}") from exc


def _videos_of(data):
    return tuple(data.videos) if isinstance(data, Dataset) else tuple(data)


@dataclass(frozen=True)
class FeatureExtractor:
    """Everything needed to turn a raw video into channel vectors.

    Points are labeled by the nearest *original* centroid and then mapped
    through the merge table onto the reduced vocabulary, so a reduced word
    means "any of the original words fused into it".
    """

    orig_vocab: vocab_mod.Vocabulary
    vocab: vocab_mod.Vocabulary
    lmap: np.ndarray  # (orig_size + 1,) original word id -> reduced word id
    kernels: object  # KernelSet
    correlations: characterize.Correlations | None
    pca: characterize.PcaModel | None
    channels: tuple

    def __post_init__(self):
        lm = np.ascontiguousarray(np.asarray(self.lmap, np.int64))
        if lm.shape != (self.orig_vocab.size + 1,):
            raise ValueError("label map must have one entry per original word (plus slot 0)")
        lm.setflags(write=False)
        object.__setattr__(self, "lmap", lm)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def needs_correlogram(self) -> bool:
        return any(c != "bovw" for c in self.channels)

    def label_video(self, video):
        labeled = label_points(video, self.orig_vocab)
        return labeled.with_labels(self.lmap[labeled.labels])

    def features_of(self, video) -> characterize.ChannelFeatures:
        labeled = self.label_video(video)
        cg = None
        if self.needs_correlogram:
            cg = correlogram(labeled, self.kernels, self.vocab.size)
        chans = {}
        for name in self.channels:
            if name == "bovw":
                chans[name] = characterize.bovw(labeled, self.vocab.size)
            elif name == "boc":
                chans[name] = characterize.boc(cg, self.correlations)
            elif name == "hara":
                chans[name] = characterize.haralick_vector(cg)
            else:  # pcacooc
                chans[name] = characterize.pca_cooc(cg, self.pca)
        return characterize.ChannelFeatures(video.video_id, chans)


def featurize(extractor: FeatureExtractor, videos):
    """Channel vectors for each video, in order."""
    return [extractor.features_of(v) for v in _videos_of(videos)]


@dataclass(frozen=True)
class FittedPipeline:
    """A trained end-to-end model over a fixed training set."""

    extractor: FeatureExtractor
    channel_config: classify.ChannelConfig
    svm: classify.SvmModel
    train_features: tuple
    train_video_ids: tuple
    train_classes: tuple
    merge_trace: tuple
    config: PipelineConfig
    seed: object

    def __post_init__(self):
        object.__setattr__(self, "train_features", tuple(self.train_features))
        object.__setattr__(self, "train_video_ids", tuple(self.train_video_ids))
        object.__setattr__(self, "train_classes", tuple(self.train_classes))
        object.__setattr__(self, "merge_trace", tuple(float(v) for v in self.merge_trace))
        n = len(self.train_features)
        if not (n == len(self.train_video_ids) == len(self.train_classes) == self.svm.n_train):
            raise ValueError("training features, ids, classes, and SVM size must align")

    @property
    def classes(self) -> tuple:
        return self.svm.classes


def _check_training_set(vids):
    if len(vids) < 2:
        raise ValueError(f"need at least 2 training videos (got {len(vids)})")
    missing = [v.video_id for v in vids if v.action_class is None]
    if missing:
        raise ValueError(f"training videos without a class label: {missing[:5]}")
    classes = sorted({v.action_class for v in vids})
    if len(classes) < 2:
        raise ValueError(f"training data must cover at least 2 classes (got {classes})")


def fit_pipeline(data, config: PipelineConfig, seed=None, prefit=None) -> FittedPipeline:
    """Train the full pipeline on classed videos.

    ``prefit`` optionally injects an already-built ``(original, reduced)``
    vocabulary pair, skipping the vocabulary and reduction stages (used by the
    size sweep, which shares one vocabulary across its evaluations).
    """
    vids = _videos_of(data)
    _check_training_set(vids)
    if seed is None:
        seed = config.seed
    trace = ()
    if prefit is not None:
        orig_vocab, vocab = prefit
        if vocab.dim != orig_vocab.dim:
            raise ValueError("prefit vocabularies must share descriptor dimension")
        if max(max(s) for s in vocab.merged_from) > orig_vocab.size:
            raise ValueError("prefit reduced vocabulary references unknown original words")
        labeled_orig = None
    else:
        with _stage("vocabulary"):
            orig_vocab = vocab_mod.build_vocabulary(
                vids, k=config.vocab_k, sample_size=config.vocab_sample_size,
                seed=seed_key(seed, _TAG_VOCAB))
            labeled_orig = [label_points(v, orig_vocab) for v in vids]
        with _stage("reduction"):
            if config.reduce_to is not None and config.reduce_to < orig_vocab.size:
                cm = vocab_mod.class_word_counts(labeled_orig, orig_vocab.size)
                vocab, trace = vocab_mod.reduce_vocabulary(orig_vocab, cm, config.reduce_to)
            else:
                vocab = orig_vocab

    lmap = vocab_mod.label_map(vocab, orig_vocab.size)
    with _stage("labeling"):
        if labeled_orig is not None:
            labeled = [v.with_labels(lmap[v.labels]) for v in labeled_orig]
        else:
            labeled = [
                (lv := label_points(v, orig_vocab)).with_labels(lmap[lv.labels])
                for v in vids
            ]

    kernels = make_kernels(config.kernel_count, config.spatial_range, config.temporal_range)
    needs_cg = any(c != "bovw" for c in config.channels)
    cgs = None
    if needs_cg:
        with _stage("correlograms"):
            cgs = [correlogram(v, kernels, vocab.size) for v in labeled]

    correlations = None
    if "boc" in config.channels:
        with _stage("correlations"):
            correlations = characterize.fit_correlations(
                cgs, config.correlations_q, seed=seed_key(seed, _TAG_CORRELATIONS))

    pca = None
    if "pcacooc" in config.channels:
        n_train = len(vids)
        s = config.pca_s if config.pca_s is not None else min(100, n_train - 1)
        if s > n_train - 1:
            raise ConfigError(
                f"requested component count S={s} exceeds the maximum admissible "
                f"n_train - 1 = {n_train - 1} (covariance rank limit)")
        with _stage("pca"):
            pca = characterize.fit_pca(np.stack([cg.vector() for cg in cgs]), s)

    extractor = FeatureExtractor(
        orig_vocab=orig_vocab, vocab=vocab, lmap=lmap, kernels=kernels,
        correlations=correlations, pca=pca, channels=config.channels)

    with _stage("features"):
        features = []
        for i, v in enumerate(labeled):
            chans = {}
            for name in config.channels:
                if name == "bovw":
                    chans[name] = characterize.bovw(v, vocab.size)
                elif name == "boc":
                    chans[name] = characterize.boc(cgs[i], correlations)
                elif name == "hara":
                    chans[name] = characterize.haralick_vector(cgs[i])
                else:
                    chans[name] = characterize.pca_cooc(cgs[i], pca)
            features.append(characterize.ChannelFeatures(v.video_id, chans))

    with _stage("normalizers"):
        base = classify.ChannelConfig(channels=config.channels, l2_squared=config.l2_squared)
        channel_config = base.with_normalizers(classify.fit_normalizers(features, base))

    with _stage("svm"):
        gram = classify.gram_matrix(features, channel_config)
        labels = [v.action_class for v in vids]
        c = _select_c(gram, labels, config, seed)
        svm = classify.svm_train(gram, labels, c=c,
                                 tol=config.svm_tol, max_iter=config.svm_max_iter)

    return FittedPipeline(
        extractor=extractor,
        channel_config=channel_config,
        svm=svm,
        train_features=tuple(features),
        train_video_ids=tuple(v.video_id for v in vids),
        train_classes=tuple(v.action_class for v in vids),
        merge_trace=trace,
        config=config,
        seed=seed,
    )


def _select_c(gram, labels, config: PipelineConfig, seed) -> float:
    """Pick C from the configured grid by inner cross-validation (default C
    when no grid is set).  Ties favor the smaller C."""
    grid = config.svm_c_grid
    if not grid:
        return config.svm_c
    lab = list(labels)
    counts = {c: lab.count(c) for c in set(lab)}
    folds = min(3, min(counts.values()))
    if folds < 2:
        raise ValueError(
            "svm.c_grid selection needs every class at least twice in the training set")
    rng = np.random.default_rng(seed_key(seed, _TAG_CGRID))
    assign = _stratified_assignment(lab, folds, rng)
    best_c, best_acc = None, -1.0
    for cand in sorted(grid):
        correct = total = 0
        for f in range(folds):
            te = np.flatnonzero(assign == f)
            tr = np.flatnonzero(assign != f)
            if len({lab[i] for i in tr}) < 2:
                continue
            model = classify.svm_train(
                gram[np.ix_(tr, tr)], [lab[i] for i in tr],
                c=cand, tol=config.svm_tol, max_iter=config.svm_max_iter)
            preds = classify.svm_predict(model, gram[np.ix_(te, tr)])
            correct += sum(p == lab[i] for p, i in zip(preds, te))
            total += te.size
        acc = correct / total if total else 0.0
        if acc > best_acc:
            best_c, best_acc = cand, acc
    return float(best_c)


def predict_videos(fp: FittedPipeline, videos):
    """Predicted class per video plus the channel features used."""
    vids = _videos_of(videos)
    if not vids:
        raise ValueError("no videos to predict")
    feats = featurize(fp.extractor, vids)
    rows = classify.kernel_rows(feats, fp.train_features, fp.channel_config)
    return classify.svm_predict(fp.svm, rows), feats


# ---------------------------------------------------------------------------
# Evaluation splits


def _stratified_assignment(labels, folds, rng):
    """Fold id per item: per-class shuffle, then round-robin dealing."""
    assign = np.empty(len(labels), np.int64)
    lab = np.asarray(labels, object)
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(lab == cls)
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            assign[i] = pos % folds
    return assign


def make_folds(videos, split: SplitConfig, seed=0):
    """(train_indices, test_indices) pairs plus a short description.

    stratified: seeded per-class round-robin dealing into ``folds`` folds.
    grouped: whole groups dealt into folds, so no group straddles a split.
    fixed: one split whose test side is exactly the configured groups.
    """
    vids = _videos_of(videos)
    n = len(vids)
    if split.kind == "stratified":
        if any(v.action_class is None for v in vids):
            raise ValueError("stratified folds need a class on every video")
        rng = np.random.default_rng(seed_key(seed, _TAG_FOLDS))
        assign = _stratified_assignment([v.action_class for v in vids], split.folds, rng)
        pairs = [(np.flatnonzero(assign != f), np.flatnonzero(assign == f))
                 for f in range(split.folds)]
        desc = f"stratified {split.folds}-fold"
    elif split.kind == "grouped":
        groups = [v.group for v in vids]
        if any(g is None for g in groups):
            raise ValueError("grouped folds need a group on every video")
        uniq = sorted(set(groups))
        if len(uniq) < split.folds:
            raise ValueError(
                f"grouped split needs at least {split.folds} groups (got {len(uniq)})")
        rng = np.random.default_rng(seed_key(seed, _TAG_FOLDS))
        order = [uniq[i] for i in rng.permutation(len(uniq))]
        fold_of = {g: pos % split.folds for pos, g in enumerate(order)}
        assign = np.asarray([fold_of[g] for g in groups], np.int64)
        pairs = [(np.flatnonzero(assign != f), np.flatnonzero(assign == f))
                 for f in range(split.folds)]
        desc = f"grouped {split.folds}-fold over {len(uniq)} groups"
    else:  # fixed
        groups = [v.group for v in vids]
        if any(g is None for g in groups):
            raise ValueError("fixed split needs a group on every video")
        uniq = set(groups)
        unknown = sorted(set(split.test_groups) - uniq)
        if unknown:
            raise ValueError(f"fixed split names unknown group(s): {', '.join(unknown)}")
        test_set = set(split.test_groups)
        mask = np.asarray([g in test_set for g in groups], bool)
        if mask.all():
            raise ValueError("fixed split leaves no training videos")
        pairs = [(np.flatnonzero(~mask), np.flatnonzero(mask))]
        desc = f"fixed test groups ({', '.join(sorted(test_set))})"
    for f, (tr, te) in enumerate(pairs):
        if te.size == 0:
            raise ValueError(f"fold {f} has no test videos; use fewer folds for {n} videos")
    return pairs, desc


def cross_validate(data, config: PipelineConfig, seed=None, split=None) -> classify.EvalReport:
    """Fit on each training fold, evaluate its held-out videos, pool the
    predictions into one report (the overall rate is then the support-weighted
    mean of per-class accuracies)."""
    vids = _videos_of(data)
    if seed is None:
        seed = config.seed
    split = split if split is not None else config.split
    if any(v.action_class is None for v in vids):
        raise ValueError("cross-validation needs a class on every video")
    classes = sorted({v.action_class for v in vids})
    pairs, desc = make_folds(vids, split, seed)
    preds_all, truths_all, fold_rates = [], [], []
    for f, (tr, te) in enumerate(pairs):
        train_classes = {vids[i].action_class for i in tr}
        absent = sorted(set(classes) - train_classes)
        if absent:
            raise ValueError(
                f"class {absent[0]!r} absent from training fold {f}; "
                f"use fewer folds or more videos per class")
        fp = fit_pipeline([vids[i] for i in tr], config, seed=seed_key(seed, _TAG_FOLD_FIT, f))
        preds, _ = predict_videos(fp, [vids[i] for i in te])
        truths = [vids[i].action_class for i in te]
        preds_all.extend(preds)
        truths_all.extend(truths)
        fold_rates.append(100.0 * sum(p == t for p, t in zip(preds, truths)) / len(truths))
    desc = f"{desc}, seed {seed}; fold rates: " + ", ".join(f"{r:.2f}" for r in fold_rates)
    return classify.evaluate(preds_all, truths_all, split=desc)


# ---------------------------------------------------------------------------
# Vocabulary-size sweep


def sweep_tradeoff(data, vocab, sizes, config: PipelineConfig, seed=None):
    """Evaluate reduced vocabularies of each requested size.

    One shared merge schedule produces all snapshots; each size is then
    cross-validated with the configured split, refitting every post-vocabulary
    stage per fold.  Returns (rows ascending by size, best size), where best
    maximizes the trade-off factor (ties: smaller vocabulary).
    """
    vids = _videos_of(data)
    if seed is None:
        seed = config.seed
    if any(v.action_class is None for v in vids):
        raise ValueError("sweep needs a class on every video")
    sizes = sorted({int(s) for s in sizes})
    if not sizes:
        raise ValueError("sweep needs at least one size")
    if sizes[0] < 1 or sizes[-1] > vocab.size:
        raise ValueError(f"sweep sizes must be in 1..{vocab.size} (got {sizes})")
    labeled = [label_points(v, vocab) for v in vids]
    cm = vocab_mod.class_word_counts(labeled, vocab.size)
    snapshots, _ = vocab_mod.reduction_schedule(vocab, cm, sizes)
    classes = sorted({v.action_class for v in vids})
    pairs, _ = make_folds(vids, config.split, seed)
    rows = []
    for size in sizes:
        try:
            reduced = snapshots[size]
            preds_all, truths_all = [], []
            for f, (tr, te) in enumerate(pairs):
                train_classes = {vids[i].action_class for i in tr}
                absent = sorted(set(classes) - train_classes)
                if absent:
                    raise ValueError(
                        f"class {absent[0]!r} absent from training fold {f}")
                fp = fit_pipeline(
                    [vids[i] for i in tr], config,
                    seed=seed_key(seed, _TAG_SWEEP_FIT, size, f),
                    prefit=(vocab, reduced))
                preds, _ = predict_videos(fp, [vids[i] for i in te])
                preds_all.extend(preds)
                truths_all.extend(vids[i].action_class for i in te)
            rate = 100.0 * sum(p == t for p, t in zip(preds_all, truths_all)) / len(truths_all)
        except ValueError as exc:
            raise ValueError(f"size {size}: {exc}") from exc
        rows.append(vocab_mod.TradeoffRow(
            reduced_size=size,
            classification_rate=rate,
            m_factor=vocab_mod.tradeoff_factor(size, vocab.size, rate),
            orig_size=vocab.size,
        ))
    best = rows[0]
    for row in rows[1:]:
        if row.m_factor > best.m_factor:
            best = row
    return tuple(rows), best.reduced_size
