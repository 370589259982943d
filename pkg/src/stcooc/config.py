"""Run configuration: one structured JSON document validated up front.

Every knob of the pipeline lives here with an explicit default, and the
resolved configuration (defaults filled in) can be echoed back so any run is
reproducible from its log.  Validation happens before any computation starts;
violations raise :class:`ConfigError` naming the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .characterize import CHANNELS
from .errors import ConfigError

__all__ = ["SplitConfig", "PipelineConfig", "load_config"]

_SPLIT_KINDS = ("stratified", "grouped", "fixed")


@dataclass(frozen=True)
class SplitConfig:
    """How a dataset is divided for evaluation.

    ``stratified``: seeded per-class round-robin folds.
    ``grouped``: whole groups (e.g. one subject's videos) dealt into folds.
    ``fixed``: a single split whose test side is the listed groups.
    """

    kind: str = "stratified"
    folds: int = 5
    test_groups: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _SPLIT_KINDS:
            raise ConfigError(
                f"split.kind must be one of {_SPLIT_KINDS} (got {self.kind!r})")
        if self.kind == "fixed":
            if not self.test_groups:
                raise ConfigError("split.test_groups must be non-empty for kind 'fixed'")
        else:
            if self.test_groups:
                raise ConfigError("split.test_groups only applies to kind 'fixed'")
            if not isinstance(self.folds, int) or self.folds < 2:
                raise ConfigError(f"split.folds must be an integer >= 2 (got {self.folds!r})")
        object.__setattr__(self, "test_groups", tuple(str(g) for g in self.test_groups))

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "fixed":
            d["test_groups"] = list(self.test_groups)
        else:
            d["folds"] = self.folds
        return d


def _expect(mapping, context, allowed):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context} must be an object (got {type(mapping).__name__})")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {', '.join(unknown)}")


def _int(value, context, minimum=None, maximum=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{context} must be an integer (got {value!r})")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{context} must be >= {minimum} (got {value})")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{context} must be <= {maximum} (got {value})")
    return value


def _real(value, context, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context} must be a number (got {value!r})")
    v = float(value)
    if positive and not v > 0:
        raise ConfigError(f"{context} must be > 0 (got {value})")
    return v


@dataclass(frozen=True)
class PipelineConfig:
    """Validated description of a full fit/evaluate run."""

    vocab_k: int = 1000
    vocab_sample_size: int | None = 100_000
    reduce_to: int | None = None
    sweep_sizes: tuple[int, ...] = ()
    replay_rows: tuple[tuple[int, float], ...] = ()
    replay_orig_size: int | None = None
    kernel_count: int = 5
    spatial_range: tuple[int, int] = (2, 40)
    temporal_range: tuple[int, int] = (2, 60)
    correlations_q: int = 400
    pca_s: int | None = None
    channels: tuple[str, ...] = CHANNELS
    l2_squared: bool = True
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_max_iter: int = 100_000
    svm_c_grid: tuple[float, ...] = ()
    split: SplitConfig = field(default_factory=SplitConfig)
    seed: int = 0

    def __post_init__(self):
        _int(self.vocab_k, "vocab.k", minimum=1)
        if self.vocab_sample_size is not None:
            _int(self.vocab_sample_size, "vocab.sample_size", minimum=1)
        modes = [self.reduce_to is not None, bool(self.sweep_sizes), bool(self.replay_rows)]
        if sum(modes) > 1:
            raise ConfigError(
                "reduce: target_size, sweep, and replay are mutually exclusive")
        if self.reduce_to is not None:
            _int(self.reduce_to, "reduce.target_size", minimum=1, maximum=self.vocab_k)
        sizes = tuple(_int(s, "reduce.sweep entry", minimum=1, maximum=self.vocab_k)
                      for s in self.sweep_sizes)
        if len(set(sizes)) != len(sizes):
            raise ConfigError("reduce.sweep sizes must be distinct")
        object.__setattr__(self, "sweep_sizes", sizes)
        rows = []
        for row in self.replay_rows:
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                raise ConfigError("reduce.replay entries must be [size, rate_percent] pairs")
            size = _int(row[0], "reduce.replay size", minimum=1)
            rate = _real(row[1], "reduce.replay rate_percent")
            if not 0.0 <= rate <= 100.0:
                raise ConfigError(f"reduce.replay rate_percent must be in 0..100 (got {rate})")
            rows.append((size, rate))
        object.__setattr__(self, "replay_rows", tuple(rows))
        if self.replay_orig_size is not None:
            _int(self.replay_orig_size, "reduce.orig_size", minimum=1)
            if not self.replay_rows:
                raise ConfigError("reduce.orig_size requires reduce.replay rows")
        _int(self.kernel_count, "kernels.count", minimum=1)
        for name, rng in (("spatial", self.spatial_range), ("temporal", self.temporal_range)):
            if not isinstance(rng, (list, tuple)) or len(rng) != 2:
                raise ConfigError(f"kernels.{name} must be a [lo, hi] pair")
            lo = _int(rng[0], f"kernels.{name} lo", minimum=1)
            hi = _int(rng[1], f"kernels.{name} hi", minimum=1)
            if self.kernel_count > 1 and not lo < hi:
                raise ConfigError(f"kernels.{name} needs lo < hi (got {lo}, {hi})")
            object.__setattr__(self, f"{name}_range", (lo, hi))
        _int(self.correlations_q, "correlations.q", minimum=1)
        if self.pca_s is not None:
            _int(self.pca_s, "pca.s", minimum=1)
        chans = tuple(self.channels)
        if not chans:
            raise ConfigError("channels must list at least one characterization")
        bad = sorted(set(chans) - set(CHANNELS))
        if bad:
            raise ConfigError(
                f"channels: unknown name(s) {', '.join(bad)}; valid: {', '.join(CHANNELS)}")
        if len(set(chans)) != len(chans):
            raise ConfigError("channels must not repeat")
        object.__setattr__(self, "channels", tuple(c for c in CHANNELS if c in chans))
        if not isinstance(self.l2_squared, bool):
            raise ConfigError(f"l2_squared must be true or false (got {self.l2_squared!r})")
        _real(self.svm_c, "svm.c", positive=True)
        _real(self.svm_tol, "svm.tol", positive=True)
        _int(self.svm_max_iter, "svm.max_iter", minimum=1)
        grid = tuple(_real(c, "svm.c_grid entry", positive=True) for c in self.svm_c_grid)
        object.__setattr__(self, "svm_c_grid", grid)
        if not isinstance(self.split, SplitConfig):
            raise ConfigError("split must be a SplitConfig")
        _int(self.seed, "seed", minimum=0)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, obj) -> "PipelineConfig":
        _expect(obj, "config", (
            "vocab", "reduce", "kernels", "correlations", "pca",
            "channels", "l2_squared", "svm", "split", "seed"))
        kw = {}

        vocab = obj.get("vocab", {})
        _expect(vocab, "vocab", ("k", "sample_size"))
        if "k" in vocab:
            kw["vocab_k"] = vocab["k"]
        if "sample_size" in vocab:
            kw["vocab_sample_size"] = vocab["sample_size"]

        red = obj.get("reduce", {})
        _expect(red, "reduce", ("target_size", "sweep", "replay", "orig_size"))
        if "target_size" in red and red["target_size"] is not None:
            kw["reduce_to"] = red["target_size"]
        if "sweep" in red:
            if not isinstance(red["sweep"], list):
                raise ConfigError("reduce.sweep must be a list of sizes")
            kw["sweep_sizes"] = tuple(red["sweep"])
        if "replay" in red:
            if not isinstance(red["replay"], list):
                raise ConfigError("reduce.replay must be a list of [size, rate] pairs")
            kw["replay_rows"] = tuple(tuple(r) if isinstance(r, list) else r
                                      for r in red["replay"])
        if "orig_size" in red:
            kw["replay_orig_size"] = red["orig_size"]

        ker = obj.get("kernels", {})
        _expect(ker, "kernels", ("count", "spatial", "temporal"))
        if "count" in ker:
            kw["kernel_count"] = ker["count"]
        if "spatial" in ker:
            kw["spatial_range"] = tuple(ker["spatial"]) if isinstance(ker["spatial"], list) else ker["spatial"]
        if "temporal" in ker:
            kw["temporal_range"] = tuple(ker["temporal"]) if isinstance(ker["temporal"], list) else ker["temporal"]

        corr = obj.get("correlations", {})
        _expect(corr, "correlations", ("q",))
        if "q" in corr:
            kw["correlations_q"] = corr["q"]

        pca = obj.get("pca", {})
        _expect(pca, "pca", ("s",))
        if "s" in pca:
            kw["pca_s"] = pca["s"]

        if "channels" in obj:
            if not isinstance(obj["channels"], list):
                raise ConfigError("channels must be a list of names")
            kw["channels"] = tuple(obj["channels"])
        if "l2_squared" in obj:
            kw["l2_squared"] = obj["l2_squared"]

        svm = obj.get("svm", {})
        _expect(svm, "svm", ("c", "tol", "max_iter", "c_grid"))
        if "c" in svm:
            kw["svm_c"] = svm["c"]
        if "tol" in svm:
            kw["svm_tol"] = svm["tol"]
        if "max_iter" in svm:
            kw["svm_max_iter"] = svm["max_iter"]
        if "c_grid" in svm:
            if not isinstance(svm["c_grid"], list):
                raise ConfigError("svm.c_grid must be a list of positive numbers")
            kw["svm_c_grid"] = tuple(svm["c_grid"])

        split = obj.get("split", {})
        _expect(split, "split", ("kind", "folds", "test_groups"))
        skw = {}
        if "kind" in split:
            if not isinstance(split["kind"], str):
                raise ConfigError("split.kind must be a string")
            skw["kind"] = split["kind"]
        if "folds" in split:
            skw["folds"] = split["folds"]
        if "test_groups" in split:
            if not isinstance(split["test_groups"], list):
                raise ConfigError("split.test_groups must be a list of group names")
            skw["test_groups"] = tuple(split["test_groups"])
        kw["split"] = SplitConfig(**skw)

        if "seed" in obj:
            kw["seed"] = obj["seed"]
        return cls(**kw)

    def to_dict(self) -> dict:
        """Fully resolved form (defaults filled in); echo this at startup."""
        reduce_d = {}
        if self.reduce_to is not None:
            reduce_d["target_size"] = self.reduce_to
        if self.sweep_sizes:
            reduce_d["sweep"] = list(self.sweep_sizes)
        if self.replay_rows:
            reduce_d["replay"] = [[s, r] for s, r in self.replay_rows]
        if self.replay_orig_size is not None:
            reduce_d["orig_size"] = self.replay_orig_size
        return {
            "vocab": {"k": self.vocab_k, "sample_size": self.vocab_sample_size},
            "reduce": reduce_d,
            "kernels": {
                "count": self.kernel_count,
                "spatial": list(self.spatial_range),
                "temporal": list(self.temporal_range),
            },
            "correlations": {"q": self.correlations_q},
            "pca": {"s": self.pca_s},
            "channels": list(self.channels),
            "l2_squared": self.l2_squared,
            "svm": {
                "c": self.svm_c,
                "tol": self.svm_tol,
                "max_iter": self.svm_max_iter,
                "c_grid": list(self.svm_c_grid),
            },
            "split": self.split.to_dict(),
            "seed": self.seed,
        }

    def override(self, **changes) -> "PipelineConfig":
        """Functional update with re-validation."""
        return replace(self, **changes)


def load_config(path) -> PipelineConfig:
    """Read and validate a JSON configuration document."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return PipelineConfig.from_dict(obj)
