"""Videos as labeled spatio-temporal interest-point clouds.

A video is a set of interest points, each carrying a position (x, y, t), a
detection scale and a float descriptor; after vocabulary assignment each point
additionally carries a 1-based word label.  Datasets are stored as JSON-lines
files, one video per line, so corpora stream and diff cleanly.

Also hosts the synthetic-corpus generator: classes are defined by word-pair
emission rules (which prototype words co-occur, how often, within what
radius), with per-class word marginals required to be identical so that only
co-occurrence structure separates the classes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._seeds import seed_key
from .errors import ConfigError, FeatureFileError

__all__ = [
    "InterestPoint",
    "LabeledVideo",
    "Dataset",
    "load_dataset",
    "save_dataset",
    "label_points",
    "PairRule",
    "SynthClass",
    "SynthSpec",
    "synth_spec_from_json",
    "synth_dataset",
]


@dataclass(frozen=True)
class InterestPoint:
    """One detected interest point (row view over a video's columns)."""

    x: float
    y: float
    t: float
    scale: float
    descriptor: np.ndarray
    label: int | None = None  # 1-based word index, if assigned


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledVideo:
    """A video's interest points in columnar form.

    ``labels`` is either empty (unlabeled) or one 1-based word index per
    point.  Arrays are validated and frozen at construction.
    """

    video_id: str
    action_class: str | None
    group: str | None
    extent: tuple[int, int, int]  # (width, height, frames)
    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray
    scales: np.ndarray
    descriptors: np.ndarray
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise ValueError("video_id must be a non-empty string")
        ext = tuple(int(v) for v in self.extent)
        if len(ext) != 3 or any(v < 1 for v in ext):
            raise ValueError(f"video {self.video_id}: extent must be three integers >= 1, got {self.extent!r}")
        object.__setattr__(self, "extent", ext)
        xs = _readonly(np.asarray(self.xs, np.float64))
        ys = _readonly(np.asarray(self.ys, np.float64))
        ts = _readonly(np.asarray(self.ts, np.float64))
        sc = _readonly(np.asarray(self.scales, np.float64))
        de = np.asarray(self.descriptors, np.float64)
        if de.ndim != 2:
            raise ValueError(f"video {self.video_id}: descriptors must be a 2-d array")
        de = _readonly(de)
        n = xs.shape[0]
        for name, a in (("ys", ys), ("ts", ts), ("scales", sc)):
            if a.shape != (n,):
                raise ValueError(f"video {self.video_id}: {name} length {a.shape} != point count {n}")
        if de.shape[0] != n:
            raise ValueError(f"video {self.video_id}: descriptor rows {de.shape[0]} != point count {n}")
        if n > 0 and de.shape[1] < 1:
            raise ValueError(f"video {self.video_id}: descriptor length must be >= 1")
        for name, a in (("xs", xs), ("ys", ys), ("ts", ts), ("scales", sc), ("descriptors", de)):
            if a.size and not np.all(np.isfinite(a)):
                raise ValueError(f"video {self.video_id}: non-finite value in {name}")
        w, h, f = ext
        for name, a, hi in (("x", xs, w), ("y", ys, h), ("t", ts, f)):
            if a.size and (a.min() < 0 or a.max() > hi):
                raise ValueError(f"video {self.video_id}: {name} coordinate outside [0, {hi}]")
        if sc.size and sc.min() <= 0:
            raise ValueError(f"video {self.video_id}: scales must be positive")
        lab = np.asarray(self.labels, np.int64)
        if lab.shape not in ((0,), (n,)):
            raise ValueError(f"video {self.video_id}: labels must be empty or one per point")
        if lab.size and lab.min() < 1:
            raise ValueError(f"video {self.video_id}: word labels are 1-based (min found {lab.min()})")
        lab = _readonly(lab)
        for name, a in (("xs", xs), ("ys", ys), ("ts", ts), ("scales", sc), ("descriptors", de), ("labels", lab)):
            object.__setattr__(self, name, a)

    @property
    def n_points(self) -> int:
        return self.xs.shape[0]

    @property
    def is_labeled(self) -> bool:
        return self.n_points == 0 or self.labels.size == self.n_points

    @property
    def descriptor_len(self) -> int | None:
        return int(self.descriptors.shape[1]) if self.n_points else None

    def points(self) -> list[InterestPoint]:
        lab = self.labels if self.labels.size else None
        return [
            InterestPoint(
                float(self.xs[i]), float(self.ys[i]), float(self.ts[i]),
                float(self.scales[i]), self.descriptors[i],
                int(lab[i]) if lab is not None else None,
            )
            for i in range(self.n_points)
        ]

    @classmethod
    def from_points(cls, video_id, extent, points, action_class=None, group=None, labels=()):
        """Build from an iterable of (x, y, t, scale, descriptor) tuples."""
        pts = list(points)
        dlen = len(pts[0][4]) if pts else 0
        return cls(
            video_id=video_id,
            action_class=action_class,
            group=group,
            extent=extent,
            xs=np.array([p[0] for p in pts], np.float64),
            ys=np.array([p[1] for p in pts], np.float64),
            ts=np.array([p[2] for p in pts], np.float64),
            scales=np.array([p[3] for p in pts], np.float64),
            descriptors=np.array([p[4] for p in pts], np.float64).reshape(len(pts), dlen),
            labels=np.asarray(list(labels), np.int64),
        )

    def with_labels(self, labels) -> "LabeledVideo":
        return LabeledVideo(
            self.video_id, self.action_class, self.group, self.extent,
            self.xs, self.ys, self.ts, self.scales, self.descriptors,
            np.asarray(labels, np.int64),
        )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of videos with consistent descriptors."""

    videos: tuple[LabeledVideo, ...]
    class_set: tuple[str, ...]
    descriptor_len: int

    @classmethod
    def from_videos(cls, videos) -> "Dataset":
        vids = tuple(videos)
        if not vids:
            raise ValueError("dataset must contain at least one video")
        seen = set()
        for v in vids:
            if v.video_id in seen:
                raise ValueError(f"duplicate video_id {v.video_id!r}")
            seen.add(v.video_id)
        dlens = {v.descriptor_len for v in vids if v.descriptor_len is not None}
        if len(dlens) > 1:
            raise ValueError(f"inconsistent descriptor lengths across videos: {sorted(dlens)}")
        dlen = dlens.pop() if dlens else 0
        classes = tuple(sorted({v.action_class for v in vids if v.action_class is not None}))
        return cls(videos=vids, class_set=classes, descriptor_len=dlen)

    def __len__(self):
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)


# ---------------------------------------------------------------------------
# JSON-lines persistence


_RECORD_KEYS = {"video_id", "class", "group", "width", "height", "frames", "points", "labels"}


def _record_to_video(rec, line):
    def fail(msg):
        raise FeatureFileError(msg, line=line)

    if not isinstance(rec, dict):
        fail("record is not a JSON object")
    unknown = set(rec) - _RECORD_KEYS
    if unknown:
        fail(f"unknown keys {sorted(unknown)}")
    for key in ("video_id", "width", "height", "frames", "points"):
        if key not in rec:
            fail(f"missing required key {key!r}")
    vid = rec["video_id"]
    if not isinstance(vid, str) or not vid:
        fail("video_id must be a non-empty string")
    dims = []
    for key in ("width", "height", "frames"):
        v = rec[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            fail(f"{key} must be an integer >= 1")
        dims.append(v)
    for key in ("class", "group"):
        if key in rec and (not isinstance(rec[key], str) or not rec[key]):
            fail(f"{key} must be a non-empty string when present")
    pts = rec["points"]
    if not isinstance(pts, list):
        fail("points must be a list")
    n = len(pts)
    dlen = None
    for i, p in enumerate(pts):
        if not isinstance(p, list) or len(p) < 5:
            fail(f"point {i}: expected [x, y, t, scale, d1..] with at least one descriptor entry")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in p):
            fail(f"point {i}: non-numeric entry")
        if any(not math.isfinite(v) for v in p):
            fail(f"point {i}: non-finite entry")
        if dlen is None:
            dlen = len(p) - 4
        elif len(p) - 4 != dlen:
            fail(f"point {i}: descriptor length {len(p) - 4} != {dlen} of earlier points")
    labels = rec.get("labels", [])
    if not isinstance(labels, list):
        fail("labels must be a list")
    if labels:
        if len(labels) != n:
            fail(f"labels length {len(labels)} != point count {n}")
        for i, v in enumerate(labels):
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                fail(f"label {i}: word indices are integers >= 1")
    arr = np.array(pts, np.float64).reshape(n, (dlen or 1) + 4) if n else np.zeros((0, 4))
    try:
        return LabeledVideo(
            video_id=vid,
            action_class=rec.get("class"),
            group=rec.get("group"),
            extent=(dims[0], dims[1], dims[2]),
            xs=arr[:, 0], ys=arr[:, 1], ts=arr[:, 2], scales=arr[:, 3],
            descriptors=arr[:, 4:],
            labels=np.asarray(labels, np.int64),
        )
    except ValueError as exc:
        fail(str(exc))


def load_dataset(path) -> Dataset:
    """Read a JSON-lines feature file; malformed lines raise FeatureFileError."""
    videos = []
    seen = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FeatureFileError(f"invalid JSON: {exc.msg}", line=line_no, path=path) from None
            try:
                video = _record_to_video(rec, line_no)
            except FeatureFileError as exc:
                raise FeatureFileError(exc.message, line=exc.line, path=path) from None
            if video.video_id in seen:
                raise FeatureFileError(
                    f"duplicate video_id {video.video_id!r} (first at line {seen[video.video_id]})",
                    line=line_no, path=path,
                )
            seen[video.video_id] = line_no
            videos.append(video)
    if not videos:
        raise FeatureFileError("file contains no videos", path=path)
    try:
        return Dataset.from_videos(videos)
    except ValueError as exc:
        raise FeatureFileError(str(exc), path=path) from None


def _video_to_record(v: LabeledVideo) -> dict:
    rec = {"video_id": v.video_id}
    if v.action_class is not None:
        rec["class"] = v.action_class
    if v.group is not None:
        rec["group"] = v.group
    w, h, f = v.extent
    rec.update(width=w, height=h, frames=f)
    pts = []
    for i in range(v.n_points):
        pts.append([float(v.xs[i]), float(v.ys[i]), float(v.ts[i]), float(v.scales[i])]
                   + [float(d) for d in v.descriptors[i]])
    rec["points"] = pts
    if v.labels.size:
        rec["labels"] = [int(l) for l in v.labels]
    return rec


def save_dataset(dataset, path):
    """Write videos as one JSON object per line (UTF-8, LF, shortest floats)."""
    videos = dataset.videos if isinstance(dataset, Dataset) else tuple(dataset)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in videos:
            fh.write(json.dumps(_video_to_record(v), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Vocabulary assignment


def label_points(video: LabeledVideo, vocab, chunk=512) -> LabeledVideo:
    """Assign each point the nearest centroid's 1-based index (ties -> lowest).

    ``vocab`` is a vocabulary object exposing ``centroids`` or a raw (K, l)
    array.  Distances are exact squared Euclidean; np.argmin's first-minimum
    rule implements the lowest-index tie-break.
    """
    centroids = np.asarray(getattr(vocab, "centroids", vocab), np.float64)
    if centroids.ndim != 2 or centroids.shape[0] < 1:
        raise ValueError("centroids must be a non-empty (K, l) array")
    n = video.n_points
    if n == 0:
        return video.with_labels(np.zeros(0, np.int64))
    if video.descriptors.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"video {video.video_id}: descriptor dimension mismatch "
            f"({video.descriptors.shape[1]} vs centroid {centroids.shape[1]})"
        )
    labels = np.empty(n, np.int64)
    for lo in range(0, n, chunk):
        diff = video.descriptors[lo:lo + chunk, None, :] - centroids[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels[lo:lo + chunk] = np.argmin(d2, axis=1) + 1
    return video.with_labels(labels)


# ---------------------------------------------------------------------------
# Synthetic corpora


@dataclass(frozen=True)
class PairRule:
    """Emit ``count`` point pairs with words ``pair`` within ``radius``."""

    pair: tuple[int, int]  # 1-based prototype word indices
    count: int
    radius: tuple[float, float, float]


@dataclass(frozen=True)
class SynthClass:
    name: str
    rules: tuple[PairRule, ...]


@dataclass(frozen=True)
class SynthSpec:
    """Generator spec: classes differ only in which words co-occur."""

    classes: tuple[SynthClass, ...]
    videos_per_class: int
    extent: tuple[int, int, int]
    prototypes: np.ndarray  # (W, l) descriptor prototypes
    noise_sigma: float

    def __post_init__(self):
        protos = _readonly(np.asarray(self.prototypes, np.float64))
        object.__setattr__(self, "prototypes", protos)
        if protos.ndim != 2 or protos.shape[0] < 1 or protos.shape[1] < 1:
            raise ConfigError("prototypes must be a non-empty (W, l) array")
        if self.videos_per_class < 1:
            raise ConfigError("videos_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        ext = self.extent
        if len(ext) != 3 or any(int(e) < 1 for e in ext):
            raise ConfigError("extent must be three integers >= 1")
        object.__setattr__(self, "extent", tuple(int(e) for e in ext))
        if not self.classes:
            raise ConfigError("at least one class is required")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ConfigError("class names must be unique")
        w = protos.shape[0]
        for c in self.classes:
            if not c.rules:
                raise ConfigError(f"class {c.name!r} has no emission rules")
            for r in c.rules:
                if not (1 <= r.pair[0] <= w and 1 <= r.pair[1] <= w):
                    raise ConfigError(f"class {c.name!r}: pair {r.pair} outside prototype range 1..{w}")
                if r.count < 1:
                    raise ConfigError(f"class {c.name!r}: rule count must be >= 1")
                if len(r.radius) != 3 or any(v < 0 for v in r.radius):
                    raise ConfigError(f"class {c.name!r}: radius must be three values >= 0")
                for v, size, axis in zip(r.radius, self.extent, "xyt"):
                    if 2 * v > size:
                        raise ConfigError(
                            f"class {c.name!r}: {axis}-radius {v} does not fit extent {size}"
                        )
        marg0 = self.word_marginals(self.classes[0])
        for c in self.classes[1:]:
            if self.word_marginals(c) != marg0:
                raise ConfigError(
                    "per-class word marginals must be identical across classes "
                    f"(class {c.name!r} differs from {self.classes[0].name!r})"
                )

    def word_marginals(self, synth_class: SynthClass) -> tuple[int, ...]:
        """Emissions per prototype word for one video of this class."""
        m = [0] * self.prototypes.shape[0]
        for r in synth_class.rules:
            m[r.pair[0] - 1] += r.count
            m[r.pair[1] - 1] += r.count
        return tuple(m)


def synth_spec_from_json(obj) -> SynthSpec:
    """Validate a JSON generator spec (dict) into a SynthSpec."""
    if not isinstance(obj, dict):
        raise ConfigError("generator spec must be a JSON object")
    unknown = set(obj) - {"extent", "videos_per_class", "noise_sigma", "prototypes", "classes"}
    if unknown:
        raise ConfigError(f"generator spec: unknown keys {sorted(unknown)}")
    try:
        classes = []
        for c in obj["classes"]:
            rules = tuple(
                PairRule(pair=(int(r["pair"][0]), int(r["pair"][1])),
                         count=int(r["count"]),
                         radius=tuple(float(v) for v in r["radius"]))
                for r in c["rules"]
            )
            classes.append(SynthClass(name=str(c["name"]), rules=rules))
        return SynthSpec(
            classes=tuple(classes),
            videos_per_class=int(obj["videos_per_class"]),
            extent=tuple(int(v) for v in obj["extent"]),
            prototypes=np.asarray(obj["prototypes"], np.float64),
            noise_sigma=float(obj.get("noise_sigma", 0.0)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"generator spec: missing or malformed field ({exc})") from None


def synth_dataset(spec: SynthSpec, seed: int) -> Dataset:
    """Generate the synthetic corpus; fully determined by (spec, seed)."""
    w, h, f = spec.extent
    protos = spec.prototypes
    dlen = protos.shape[1]
    videos = []
    for ci, cls in enumerate(spec.classes):
        for vi in range(spec.videos_per_class):
            rng = np.random.default_rng(seed_key(seed, ci, vi))
            rows = []
            for rule in cls.rules:
                ra = np.asarray(rule.radius, np.float64)
                lo = ra
                hi = np.asarray([w, h, f], np.float64) - ra
                for _ in range(rule.count):
                    anchor = rng.uniform(lo, hi)
                    partner = anchor + rng.uniform(-ra, ra)
                    for word, pos in ((rule.pair[0], anchor), (rule.pair[1], partner)):
                        desc = protos[word - 1] + spec.noise_sigma * rng.standard_normal(dlen)
                        rows.append((pos[0], pos[1], pos[2], 1.0, desc))
            videos.append(LabeledVideo.from_points(
                video_id=f"{cls.name}{vi:03d}",
                extent=spec.extent,
                points=rows,
                action_class=cls.name,
            ))
    return Dataset.from_videos(videos)
