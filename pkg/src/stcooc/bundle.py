"""Model persistence: a manifest document plus one raw little-endian
float32 file per array.

The layout is bit-exact and inspectable: re-running the same fit writes
byte-identical files, and the stored training predictions are computed from
the bundle itself (after the float32 round-trip), so loading a bundle and
re-predicting its training data reproduces them exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__, characterize, classify, vocabulary as vocab_mod
from .config import PipelineConfig
from .correlogram import KernelSet
from .errors import BundleError
from .pipeline import FeatureExtractor, FittedPipeline, predict_videos

__all__ = [
    "ModelBundle",
    "bundle_from_pipeline",
    "pipeline_from_bundle",
    "save_bundle",
    "load_bundle",
]

FORMAT_NAME = "stcooc-bundle"
FORMAT_VERSION = 1
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class ModelBundle:
    """In-memory form of a saved model: manifest plus named float32 arrays."""

    manifest: dict
    arrays: dict

    def __post_init__(self):
        declared = self.manifest.get("arrays", {})
        if set(declared) != set(self.arrays):
            raise BundleError(
                f"manifest declares arrays {sorted(declared)} but bundle holds "
                f"{sorted(self.arrays)}")
        clean = {}
        for name, arr in self.arrays.items():
            a = np.ascontiguousarray(np.asarray(arr, _F32))
            want = tuple(declared[name]["shape"])
            if a.shape != want:
                raise BundleError(f"array {name!r} has shape {a.shape}, manifest says {want}")
            a.setflags(write=False)
            clean[name] = a
        object.__setattr__(self, "arrays", clean)


def _f32(a):
    return np.ascontiguousarray(np.asarray(a, np.float64)).astype(_F32)


def _f64(a):
    return np.asarray(a, _F32).astype(np.float64)


def bundle_from_pipeline(fp: FittedPipeline, train_videos=None) -> ModelBundle:
    """Freeze a fitted pipeline into its storable form.

    When ``train_videos`` (the videos the pipeline was fitted on) are given,
    the bundle also records the training predictions and accuracy — computed
    through the float32 round-trip so a reloaded bundle reproduces them
    exactly.
    """
    ex = fp.extractor
    arrays = {}
    arrays["orig_centroids"] = _f32(ex.orig_vocab.centroids)
    arrays["centroids"] = _f32(ex.vocab.centroids)
    arrays["normalizers"] = _f32(fp.channel_config.normalizers)
    arrays["svm_biases"] = _f32([p.bias for p in fp.svm.pairs])
    for k, pair in enumerate(fp.svm.pairs):
        arrays[f"svm_coef_{k:03d}"] = _f32(pair.dual_coef)
    for ch in fp.channel_config.channels:
        arrays[f"train_{ch}"] = _f32(
            np.stack([f.vector(ch) for f in fp.train_features]))
    if ex.correlations is not None:
        arrays["correlation_centers"] = _f32(ex.correlations.centers)
    if ex.pca is not None:
        arrays["pca_mean"] = _f32(ex.pca.mean)
        arrays["pca_basis"] = _f32(ex.pca.basis)
        arrays["pca_variances"] = _f32(ex.pca.explained_variances)

    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "seed": fp.seed,
        "config": fp.config.to_dict(),
        "classes": list(fp.svm.classes),
        "channels": list(fp.channel_config.channels),
        "descriptor_len": ex.orig_vocab.dim,
        "orig_word_count": ex.orig_vocab.size,
        "word_count": ex.vocab.size,
        "merged_from": [sorted(s) for s in ex.vocab.merged_from],
        "kernel_half_extents": [list(k) for k in ex.kernels.half_extents],
        "merge_trace": list(fp.merge_trace),
        "pca": {"n_train": ex.pca.n_train} if ex.pca is not None else None,
        "svm": {
            "c": fp.svm.c,
            "tol": fp.svm.tol,
            "max_iter": fp.svm.max_iter,
            "n_train": fp.svm.n_train,
            "pairs": [
                {
                    "pos": p.pos_class,
                    "neg": p.neg_class,
                    "support_indices": [int(i) for i in p.support_indices],
                    "iterations": int(p.iterations),
                    "converged": bool(p.converged),
                }
                for p in fp.svm.pairs
            ],
        },
        "train": {
            "video_ids": list(fp.train_video_ids),
            "classes": list(fp.train_classes),
            "predictions": None,
            "accuracy_percent": None,
        },
        "arrays": {name: {"file": f"{name}.f32", "shape": list(a.shape)}
                   for name, a in arrays.items()},
    }
    # Normalize through JSON so the in-memory manifest equals a reloaded one.
    manifest = json.loads(json.dumps(manifest))
    bundle = ModelBundle(manifest=manifest, arrays=arrays)

    if train_videos is not None:
        replay = pipeline_from_bundle(bundle)
        preds, _ = predict_videos(replay, train_videos)
        truths = [v.action_class for v in train_videos]
        report = classify.evaluate(preds, truths, split="training data")
        manifest["train"]["predictions"] = list(preds)
        manifest["train"]["accuracy_percent"] = report.overall
        manifest = json.loads(json.dumps(manifest))
        bundle = ModelBundle(manifest=manifest, arrays=arrays)
    return bundle


def pipeline_from_bundle(bundle: ModelBundle) -> FittedPipeline:
    """Reconstruct a usable pipeline from stored arrays (float32-rounded)."""
    man = bundle.manifest
    arrays = bundle.arrays
    try:
        config = PipelineConfig.from_dict(man["config"])
        channels = tuple(man["channels"])
        orig_vocab = vocab_mod.Vocabulary.from_centroids(_f64(arrays["orig_centroids"]))
        vocab = vocab_mod.Vocabulary(
            _f64(arrays["centroids"]),
            tuple(frozenset(s) for s in man["merged_from"]))
        lmap = vocab_mod.label_map(vocab, orig_vocab.size)
        kernels = KernelSet(tuple(tuple(k) for k in man["kernel_half_extents"]))
        correlations = None
        if "correlation_centers" in arrays:
            correlations = characterize.Correlations(_f64(arrays["correlation_centers"]))
        pca = None
        if man.get("pca") is not None:
            pca = characterize.PcaModel(
                mean=_f64(arrays["pca_mean"]),
                basis=_f64(arrays["pca_basis"]),
                explained_variances=_f64(arrays["pca_variances"]),
                n_train=int(man["pca"]["n_train"]),
            )
        extractor = FeatureExtractor(
            orig_vocab=orig_vocab, vocab=vocab, lmap=lmap, kernels=kernels,
            correlations=correlations, pca=pca, channels=channels)

        channel_config = classify.ChannelConfig(
            channels=channels,
            l2_squared=bool(config.l2_squared),
            normalizers=tuple(float(v) for v in _f64(arrays["normalizers"])),
        )

        svm_m = man["svm"]
        pairs = []
        for k, pm in enumerate(svm_m["pairs"]):
            pairs.append(classify.PairwiseSvm(
                pos_class=pm["pos"],
                neg_class=pm["neg"],
                support_indices=np.asarray(pm["support_indices"], np.int64),
                dual_coef=_f64(arrays[f"svm_coef_{k:03d}"]),
                bias=float(_f64(arrays["svm_biases"])[k]),
                c=float(svm_m["c"]),
                iterations=int(pm["iterations"]),
                converged=bool(pm["converged"]),
            ))
        svm = classify.SvmModel(
            classes=tuple(man["classes"]),
            pairs=tuple(pairs),
            n_train=int(svm_m["n_train"]),
            c=float(svm_m["c"]),
            tol=float(svm_m["tol"]),
            max_iter=int(svm_m["max_iter"]),
        )

        ids = list(man["train"]["video_ids"])
        truths = list(man["train"]["classes"])
        per_channel = {ch: _f64(arrays[f"train_{ch}"]) for ch in channels}
        features = tuple(
            characterize.ChannelFeatures(
                ids[i], {ch: per_channel[ch][i] for ch in channels})
            for i in range(len(ids))
        )
        return FittedPipeline(
            extractor=extractor,
            channel_config=channel_config,
            svm=svm,
            train_features=features,
            train_video_ids=tuple(ids),
            train_classes=tuple(truths),
            merge_trace=tuple(man["merge_trace"]),
            config=config,
            seed=man["seed"],
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise BundleError(f"bundle is missing or malforms a field: {exc!r}") from None


def save_bundle(bundle: ModelBundle, path):
    """Write manifest.json plus one .f32 file per array into directory ``path``."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, arr in bundle.arrays.items():
        fname = bundle.manifest["arrays"][name]["file"]
        with open(os.path.join(path, fname), "wb") as fh:
            fh.write(np.ascontiguousarray(arr, _F32).tobytes())


def load_bundle(path) -> ModelBundle:
    """Read a bundle directory, validating format, version, and array sizes."""
    mpath = os.path.join(path, "manifest.json")
    try:
        with open(mpath, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise BundleError(f"cannot read bundle manifest {mpath}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle manifest {mpath} is not valid JSON: {exc}") from None
    if manifest.get("format") != FORMAT_NAME:
        raise BundleError(
            f"not a model bundle: format {manifest.get('format')!r} "
            f"(expected {FORMAT_NAME!r})")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise BundleError(
            f"unsupported bundle format version {manifest.get('format_version')!r} "
            f"(this build reads version {FORMAT_VERSION})")
    arrays = {}
    for name, meta in manifest.get("arrays", {}).items():
        apath = os.path.join(path, meta["file"])
        try:
            with open(apath, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise BundleError(f"cannot read array {name!r}: {exc}") from None
        shape = tuple(meta["shape"])
        want = int(np.prod(shape, dtype=np.int64)) * _F32.itemsize
        if len(raw) != want:
            raise BundleError(
                f"array {name!r} is corrupted: {len(raw)} bytes on disk, "
                f"shape {shape} needs {want}")
        arrays[name] = np.frombuffer(raw, _F32).reshape(shape)
    return ModelBundle(manifest=manifest, arrays=arrays)
