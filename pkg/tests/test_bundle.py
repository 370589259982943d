"""Model persistence: save/load round trips, byte-identical refits, the
float32 replay guarantee for stored training predictions, and corruption
detection."""

import hashlib
import json
import os

import numpy as np
import pytest

from stcooc import (
    BundleError,
    PipelineConfig,
    bundle_from_pipeline,
    fit_pipeline,
    load_bundle,
    pipeline_from_bundle,
    predict_videos,
    save_bundle,
)


def bundle_config():
    return PipelineConfig.from_dict({
        "vocab": {"k": 6, "sample_size": None},
        "reduce": {"target_size": 4},
        "kernels": {"count": 2, "spatial": [4, 12], "temporal": [3, 8]},
        "correlations": {"q": 8},
        "pca": {"s": 4},
        "seed": 3,
    })


@pytest.fixture(scope="module")
def train_videos(paired_dataset):
    alpha = [v for v in paired_dataset.videos if v.action_class == "alpha"]
    beta = [v for v in paired_dataset.videos if v.action_class == "beta"]
    return alpha[:6] + beta[:6]


@pytest.fixture(scope="module")
def fitted(train_videos):
    return fit_pipeline(train_videos, bundle_config())


@pytest.fixture(scope="module")
def bundle(fitted, train_videos):
    return bundle_from_pipeline(fitted, train_videos=train_videos)


def dir_digest(path):
    h = hashlib.sha256()
    for name in sorted(os.listdir(path)):
        h.update(name.encode())
        with open(os.path.join(path, name), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


class TestRoundTrip:
    def test_saved_bundle_loads_identically(self, bundle, tmp_path):
        out = tmp_path / "model"
        save_bundle(bundle, out)
        loaded = load_bundle(out)
        assert loaded.manifest == bundle.manifest
        assert set(loaded.arrays) == set(bundle.arrays)
        for name in bundle.arrays:
            np.testing.assert_array_equal(loaded.arrays[name], bundle.arrays[name])

    def test_manifest_contents(self, bundle, fitted):
        man = bundle.manifest
        assert man["format"] == "stcooc-bundle"
        assert man["format_version"] == 1
        assert man["classes"] == ["alpha", "beta"]
        assert man["orig_word_count"] == 6
        assert man["word_count"] == 4
        assert len(man["merge_trace"]) == 2
        assert man["config"] == fitted.config.to_dict()
        assert [tuple(k) for k in man["kernel_half_extents"]] == \
            [tuple(k) for k in fitted.extractor.kernels.half_extents]
        assert man["train"]["video_ids"] == list(fitted.train_video_ids)
        assert man["train"]["predictions"] is not None
        assert man["train"]["accuracy_percent"] is not None

    def test_refit_writes_byte_identical_bundle(self, train_videos, bundle, tmp_path):
        refit = fit_pipeline(train_videos, bundle_config())
        again = bundle_from_pipeline(refit, train_videos=train_videos)
        p1, p2 = tmp_path / "one", tmp_path / "two"
        save_bundle(bundle, p1)
        save_bundle(again, p2)
        assert dir_digest(p1) == dir_digest(p2)

    def test_arrays_are_little_endian_float32_on_disk(self, bundle, tmp_path):
        out = tmp_path / "model"
        save_bundle(bundle, out)
        meta = bundle.manifest["arrays"]["centroids"]
        raw = (out / meta["file"]).read_bytes()
        arr = np.frombuffer(raw, "<f4").reshape(meta["shape"])
        np.testing.assert_array_equal(arr, bundle.arrays["centroids"])

    def test_manifest_is_sorted_and_pretty(self, bundle, tmp_path):
        out = tmp_path / "model"
        save_bundle(bundle, out)
        text = (out / "manifest.json").read_text()
        assert text == json.dumps(bundle.manifest, indent=2, sort_keys=True) + "\n"


class TestReplay:
    def test_training_predictions_reproduce_exactly_after_load(
            self, bundle, train_videos, tmp_path):
        out = tmp_path / "model"
        save_bundle(bundle, out)
        fp = pipeline_from_bundle(load_bundle(out))
        preds, _ = predict_videos(fp, train_videos)
        assert preds == bundle.manifest["train"]["predictions"]

    def test_stored_accuracy_matches_stored_predictions(self, bundle):
        man = bundle.manifest["train"]
        correct = sum(p == t for p, t in zip(man["predictions"], man["classes"]))
        assert man["accuracy_percent"] == pytest.approx(
            100.0 * correct / len(man["classes"]))

    def test_reconstructed_pipeline_structure(self, bundle, fitted):
        fp = pipeline_from_bundle(bundle)
        assert fp.classes == fitted.classes
        assert fp.train_video_ids == fitted.train_video_ids
        assert fp.extractor.vocab.size == 4
        assert fp.extractor.orig_vocab.size == 6
        assert fp.extractor.vocab.merged_from == fitted.extractor.vocab.merged_from
        np.testing.assert_array_equal(fp.extractor.lmap, fitted.extractor.lmap)
        # arrays went through float32, so they match at that precision
        np.testing.assert_allclose(
            fp.extractor.vocab.centroids, fitted.extractor.vocab.centroids,
            rtol=1e-6, atol=1e-7)

    def test_predictions_without_train_videos_left_unset(self, fitted):
        b = bundle_from_pipeline(fitted)
        assert b.manifest["train"]["predictions"] is None
        assert b.manifest["train"]["accuracy_percent"] is None

    def test_bovw_only_bundle_round_trips(self, train_videos, tmp_path):
        cfg = bundle_config().override(channels=("bovw",))
        fp = fit_pipeline(train_videos, cfg)
        b = bundle_from_pipeline(fp, train_videos=train_videos)
        assert "correlation_centers" not in b.arrays
        assert "pca_mean" not in b.arrays
        out = tmp_path / "m"
        save_bundle(b, out)
        replay = pipeline_from_bundle(load_bundle(out))
        preds, _ = predict_videos(replay, train_videos)
        assert preds == b.manifest["train"]["predictions"]


class TestCorruptionDetection:
    def save(self, bundle, tmp_path):
        out = tmp_path / "model"
        save_bundle(bundle, out)
        return out

    def test_missing_directory(self, tmp_path):
        with pytest.raises(BundleError, match="cannot read bundle manifest"):
            load_bundle(tmp_path / "nope")

    def test_invalid_manifest_json(self, bundle, tmp_path):
        out = self.save(bundle, tmp_path)
        (out / "manifest.json").write_text("{broken")
        with pytest.raises(BundleError, match="not valid JSON"):
            load_bundle(out)

    def test_wrong_format_name(self, bundle, tmp_path):
        out = self.save(bundle, tmp_path)
        man = json.loads((out / "manifest.json").read_text())
        man["format"] = "other-thing"
        (out / "manifest.json").write_text(json.dumps(man))
        with pytest.raises(BundleError, match="not a model bundle"):
            load_bundle(out)

    def test_unsupported_version_message(self, bundle, tmp_path):
        out = self.save(bundle, tmp_path)
        man = json.loads((out / "manifest.json").read_text())
        man["format_version"] = 2
        (out / "manifest.json").write_text(json.dumps(man))
        with pytest.raises(BundleError) as err:
            load_bundle(out)
        assert str(err.value) == (
            "unsupported bundle format version 2 (this build reads version 1)")

    def test_truncated_array_reports_sizes(self, bundle, tmp_path):
        out = self.save(bundle, tmp_path)
        meta = bundle.manifest["arrays"]["normalizers"]
        apath = out / meta["file"]
        raw = apath.read_bytes()
        apath.write_bytes(raw[:-2])
        with pytest.raises(BundleError, match="'normalizers' is corrupted"):
            load_bundle(out)

    def test_missing_array_file(self, bundle, tmp_path):
        out = self.save(bundle, tmp_path)
        os.remove(out / bundle.manifest["arrays"]["centroids"]["file"])
        with pytest.raises(BundleError, match="cannot read array 'centroids'"):
            load_bundle(out)

    def test_manifest_array_mismatch_rejected(self, bundle):
        import dataclasses
        arrays = dict(bundle.arrays)
        arrays.pop("normalizers")
        with pytest.raises(BundleError, match="manifest declares arrays"):
            dataclasses.replace(bundle, arrays=arrays)

    def test_malformed_field_is_bundle_error(self, bundle):
        man = json.loads(json.dumps(bundle.manifest))
        del man["svm"]
        broken = type(bundle)(manifest=man, arrays=bundle.arrays)
        with pytest.raises(BundleError, match="missing or malforms"):
            pipeline_from_bundle(broken)
