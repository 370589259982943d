"""Shared fixtures: synthetic datasets and small pipeline configurations."""

import numpy as np
import pytest

from stcooc import (
    Dataset,
    LabeledVideo,
    PairRule,
    PipelineConfig,
    SynthClass,
    SynthSpec,
    synth_dataset,
)


def make_random_video(rng, n_points, word_count, extent=(64, 64, 48), video_id="v",
                      action_class=None, group=None, descriptor_len=4):
    """A video with uniform point positions and uniform 1-based word labels."""
    w, h, f = extent
    pts = [
        (
            float(rng.uniform(0, w)),
            float(rng.uniform(0, h)),
            float(rng.uniform(0, f)),
            float(rng.uniform(0.5, 3.0)),
            rng.normal(size=descriptor_len),
        )
        for _ in range(n_points)
    ]
    labels = rng.integers(1, word_count + 1, size=n_points)
    return LabeledVideo.from_points(
        video_id=video_id, extent=extent, points=pts,
        action_class=action_class, group=group, labels=labels,
    )


def paired_spec(videos_per_class=10, noise_sigma=0.25):
    """Two classes with identical word marginals but different pairings.

    Class "alpha" places words 1 and 2 together (tight radius) and word 3
    with itself at long range; class "beta" pairs 1 with 3 tightly and 2 with
    itself at long range.  Per video both classes emit exactly 20/20/20
    points of words 1/2/3, so any per-word histogram is uninformative in
    expectation and only co-occurrence geometry separates the classes.
    """
    return SynthSpec(
        classes=(
            SynthClass("alpha", (
                PairRule((1, 2), 20, (6.0, 6.0, 4.0)),
                PairRule((3, 3), 10, (40.0, 40.0, 25.0)),
            )),
            SynthClass("beta", (
                PairRule((1, 3), 20, (6.0, 6.0, 4.0)),
                PairRule((2, 2), 10, (40.0, 40.0, 25.0)),
            )),
        ),
        videos_per_class=videos_per_class,
        extent=(120, 120, 80),
        prototypes=np.eye(3) * 4.0,
        noise_sigma=noise_sigma,
    )


@pytest.fixture(scope="session")
def paired_dataset() -> Dataset:
    """20 videos, 2 classes, identical word marginals; deterministic."""
    return synth_dataset(paired_spec(videos_per_class=10), seed=11)


@pytest.fixture(scope="session")
def quick_config() -> PipelineConfig:
    """A small full-channel configuration that fits in well under a second."""
    return PipelineConfig.from_dict({
        "vocab": {"k": 8, "sample_size": None},
        "kernels": {"count": 3, "spatial": [4, 16], "temporal": [3, 10]},
        "correlations": {"q": 12},
        "pca": {"s": 6},
        "split": {"kind": "stratified", "folds": 3},
        "seed": 5,
    })
