"""Feature-file model: validation, JSONL round trips, point labeling, and the
synthetic generator's determinism and marginal guarantees."""

import json
import math

import numpy as np
import pytest

from stcooc import (
    Dataset,
    FeatureFileError,
    ConfigError,
    InterestPoint,
    LabeledVideo,
    label_points,
    load_dataset,
    save_dataset,
    synth_dataset,
    synth_spec_from_json,
)

from conftest import make_random_video, paired_spec


class TestLabeledVideo:
    def test_columnar_round_trip_of_points(self):
        rng = np.random.default_rng(3)
        v = make_random_video(rng, 17, 4, video_id="clip")
        pts = v.points()
        assert len(pts) == 17
        assert all(isinstance(p, InterestPoint) for p in pts)
        rebuilt = LabeledVideo.from_points(
            video_id=v.video_id, extent=v.extent,
            points=[(p.x, p.y, p.t, p.scale, p.descriptor) for p in pts],
            labels=[p.label for p in pts],
        )
        np.testing.assert_array_equal(rebuilt.xs, v.xs)
        np.testing.assert_array_equal(rebuilt.descriptors, v.descriptors)
        np.testing.assert_array_equal(rebuilt.labels, v.labels)

    def test_rejects_out_of_extent_coordinates(self):
        with pytest.raises(ValueError, match="x"):
            LabeledVideo.from_points(
                video_id="v", extent=(10, 10, 10),
                points=[(11.0, 1.0, 1.0, 1.0, [0.0])])

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError, match="scale"):
            LabeledVideo.from_points(
                video_id="v", extent=(10, 10, 10),
                points=[(1.0, 1.0, 1.0, 0.0, [0.0])])

    def test_rejects_bad_label_values(self):
        with pytest.raises(ValueError, match="label"):
            LabeledVideo.from_points(
                video_id="v", extent=(10, 10, 10),
                points=[(1.0, 1.0, 1.0, 1.0, [0.0])], labels=[0])

    def test_arrays_are_read_only(self):
        v = make_random_video(np.random.default_rng(0), 5, 3)
        with pytest.raises(ValueError):
            v.xs[0] = 1.0

    def test_empty_video_is_labeled_and_sized_zero(self):
        v = LabeledVideo.from_points(video_id="e", extent=(5, 5, 5), points=[])
        assert v.n_points == 0
        assert v.is_labeled
        assert v.descriptor_len is None


class TestDataset:
    def test_duplicate_ids_rejected(self):
        rng = np.random.default_rng(1)
        a = make_random_video(rng, 3, 2, video_id="same")
        b = make_random_video(rng, 3, 2, video_id="same")
        with pytest.raises(ValueError, match="same"):
            Dataset.from_videos([a, b])

    def test_mixed_descriptor_lengths_rejected(self):
        rng = np.random.default_rng(2)
        a = make_random_video(rng, 3, 2, video_id="a", descriptor_len=4)
        b = make_random_video(rng, 3, 2, video_id="b", descriptor_len=5)
        with pytest.raises(ValueError, match="descriptor"):
            Dataset.from_videos([a, b])

    def test_class_set_is_sorted(self):
        rng = np.random.default_rng(3)
        vids = [make_random_video(rng, 2, 2, video_id=f"v{i}", action_class=c)
                for i, c in enumerate(["walk", "box", "run"])]
        ds = Dataset.from_videos(vids)
        assert ds.class_set == ("box", "run", "walk")


class TestJsonlRoundTrip:
    def test_save_load_identity(self, tmp_path):
        rng = np.random.default_rng(7)
        vids = [
            make_random_video(rng, n, 3, video_id=f"v{i}", action_class="c1",
                              group=f"g{i % 2}")
            for i, n in enumerate([5, 0, 12])
        ]
        ds = Dataset.from_videos(vids)
        path = tmp_path / "data.jsonl"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert len(back.videos) == 3
        for v, w in zip(ds.videos, back.videos):
            assert v.video_id == w.video_id
            assert v.action_class == w.action_class
            assert v.group == w.group
            assert v.extent == w.extent
            np.testing.assert_array_equal(v.xs, w.xs)
            np.testing.assert_array_equal(v.descriptors, w.descriptors)
            np.testing.assert_array_equal(v.labels, w.labels)

    def test_save_twice_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(8)
        ds = Dataset.from_videos([make_random_video(rng, 9, 3, video_id="v")])
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(ds, p1)
        save_dataset(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = {"video_id": "v", "width": 4, "height": 4, "frames": 4,
                "points": [[1, 1, 1, 1, 0.5]]}
        path.write_text(json.dumps(good) + "\n{not json}\n")
        with pytest.raises(FeatureFileError, match="line 2"):
            load_dataset(path)

    def test_unknown_key_rejected_with_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rec = {"video_id": "v", "width": 4, "height": 4, "frames": 4,
               "points": [], "wat": 1}
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(FeatureFileError, match="wat"):
            load_dataset(path)

    def test_non_finite_values_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"video_id": "v", "width": 4, "height": 4, "frames": 4, '
            '"points": [[1, 1, 1, 1, Infinity]]}\n')
        with pytest.raises(FeatureFileError, match="finite"):
            load_dataset(path)

    def test_duplicate_video_id_across_lines(self, tmp_path):
        rec = {"video_id": "v", "width": 4, "height": 4, "frames": 4, "points": []}
        path = tmp_path / "dup.jsonl"
        path.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
        with pytest.raises(FeatureFileError, match="line 2"):
            load_dataset(path)


class TestLabelPoints:
    def test_nearest_centroid_with_low_index_ties(self):
        v = LabeledVideo.from_points(
            video_id="v", extent=(10, 10, 10),
            points=[(1.0, 1.0, 1.0, 1.0, [0.0]),
                    (2.0, 2.0, 2.0, 1.0, [0.9]),
                    (3.0, 3.0, 3.0, 1.0, [0.5])])  # tie between centroids 0 and 1
        labeled = label_points(v, np.asarray([[0.0], [1.0]]))
        assert labeled.labels.tolist() == [1, 2, 1]

    def test_matches_explicit_distance_scan(self):
        rng = np.random.default_rng(9)
        v = make_random_video(rng, 40, 3, descriptor_len=5)
        centroids = rng.normal(size=(6, 5))
        labeled = label_points(v, centroids)
        d = ((v.descriptors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        np.testing.assert_array_equal(labeled.labels, d.argmin(axis=1) + 1)

    def test_dimension_mismatch_raises(self):
        v = make_random_video(np.random.default_rng(0), 4, 2, descriptor_len=3)
        with pytest.raises(ValueError, match="dimension"):
            label_points(v, np.zeros((2, 5)))


class TestSynth:
    def test_same_spec_and_seed_reproduce_exactly(self):
        spec = paired_spec(videos_per_class=3)
        a = synth_dataset(spec, seed=4)
        b = synth_dataset(spec, seed=4)
        for v, w in zip(a.videos, b.videos):
            np.testing.assert_array_equal(v.xs, w.xs)
            np.testing.assert_array_equal(v.descriptors, w.descriptors)

    def test_different_seeds_differ(self):
        spec = paired_spec(videos_per_class=1)
        a = synth_dataset(spec, seed=4)
        b = synth_dataset(spec, seed=5)
        assert not np.array_equal(a.videos[0].xs, b.videos[0].xs)

    def test_word_marginals_match_across_classes(self):
        """Both classes emit identical per-word point counts per video."""
        spec = paired_spec(videos_per_class=2, noise_sigma=0.0)
        ds = synth_dataset(spec, seed=1)
        protos = spec.prototypes
        for v in ds.videos:
            d = ((v.descriptors[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)
            words = d.argmin(axis=1) + 1
            counts = np.bincount(words, minlength=4)[1:]
            assert counts.tolist() == [20, 20, 20], v.video_id

    def test_points_stay_inside_extent(self):
        ds = synth_dataset(paired_spec(videos_per_class=2), seed=3)
        for v in ds.videos:
            w, h, f = v.extent
            assert v.xs.min() >= 0 and v.xs.max() <= w
            assert v.ys.min() >= 0 and v.ys.max() <= h
            assert v.ts.min() >= 0 and v.ts.max() <= f

    def test_tight_pairs_are_close(self):
        """Rule partners land within the rule radius of their anchors."""
        spec = paired_spec(videos_per_class=1, noise_sigma=0.0)
        ds = synth_dataset(spec, seed=6)
        v = ds.videos[0]  # class alpha: first 40 points are 20 (1, 2) pairs
        for i in range(0, 40, 2):
            dx = abs(v.xs[i] - v.xs[i + 1])
            dy = abs(v.ys[i] - v.ys[i + 1])
            dt = abs(v.ts[i] - v.ts[i + 1])
            assert dx <= 6.0 and dy <= 6.0 and dt <= 4.0

    def test_spec_json_validation(self):
        base = {
            "classes": [
                {"name": "a", "rules": [{"pair": [1, 1], "count": 2, "radius": [2, 2, 2]}]},
                {"name": "b", "rules": [{"pair": [1, 1], "count": 2, "radius": [2, 2, 2]}]},
            ],
            "videos_per_class": 1,
            "extent": [30, 30, 30],
            "prototypes": [[1.0, 0.0]],
        }
        spec = synth_spec_from_json(base)
        assert spec.videos_per_class == 1

        bad = json.loads(json.dumps(base))
        bad["classes"][0]["rules"][0]["radius"] = [200, 2, 2]
        with pytest.raises(ConfigError, match="radius"):
            synth_spec_from_json(bad)

        bad = json.loads(json.dumps(base))
        bad["classes"][1]["rules"][0]["count"] = 3
        with pytest.raises(ConfigError, match="marginal"):
            synth_spec_from_json(bad)

        bad = json.loads(json.dumps(base))
        bad["classes"][0]["rules"][0]["pair"] = [1, 9]
        with pytest.raises(ConfigError, match="prototype"):
            synth_spec_from_json(bad)
