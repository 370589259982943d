"""Command-line front end.

Subcommands: ``synth`` (generate a feature file), ``fit`` (train and write a
model bundle), ``predict`` (classify a feature file with a bundle), ``sweep``
(vocabulary-size trade-off table), ``eval`` (cross-validated accuracy).

Every command is deterministic given (inputs, config, seed); the resolved
configuration is echoed at startup so a run is reproducible from its log.
Exit codes: 0 success, 1 runtime/data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from ._seeds import seed_key
from .bundle import bundle_from_pipeline, load_bundle, pipeline_from_bundle, save_bundle
from .classify import EvalReport, evaluate
from .config import PipelineConfig, load_config
from .datamodel import load_dataset, save_dataset, synth_dataset, synth_spec_from_json
from .errors import ConfigError, StcoocError
from .pipeline import cross_validate, fit_pipeline, predict_videos, sweep_tradeoff
from .vocabulary import TradeoffRow, build_vocabulary, tradeoff_factor

__all__ = ["main", "entry"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcooc",
        description=(
            "Action classification from labeled spatio-temporal interest points: "
            "vocabulary building and reduction, co-occurrence features, and a "
            "multi-channel kernel SVM."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def flags(p):
        p.add_argument("--config", help="pipeline configuration (JSON)")
        p.add_argument("--seed", type=int, help="seed overriding the configuration's")
        p.add_argument("--threads", type=int,
                       help="worker-thread cap (never changes results)")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("synth", help="generate a synthetic feature file from a generator spec")
    p.add_argument("data", metavar="spec", help="generator spec (JSON)")
    flags(p)

    p = sub.add_parser("fit", help="train the pipeline and write a model bundle")
    p.add_argument("data", help="feature file (JSON lines)")
    flags(p)

    p = sub.add_parser("predict", help="classify a feature file with a trained bundle")
    p.add_argument("bundle", help="model bundle directory written by fit")
    p.add_argument("data", help="feature file (JSON lines)")
    flags(p)

    p = sub.add_parser("sweep", help="evaluate reduced vocabulary sizes (or replay recorded rates)")
    p.add_argument("data", nargs="?", help="feature file (unused in replay mode)")
    flags(p)

    p = sub.add_parser("eval", help="cross-validated accuracy report")
    p.add_argument("data", help="feature file (JSON lines)")
    flags(p)
    return parser


def _require(value, flag, command):
    if value is None:
        raise ConfigError(f"{command} requires {flag}")
    return value


def _check_threads(args):
    if args.threads is not None and args.threads < 1:
        raise ConfigError(f"--threads must be >= 1 (got {args.threads})")


def _echo_config(cfg: PipelineConfig):
    print("resolved configuration:")
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def _resolve_seed(args, cfg=None):
    if args.seed is not None:
        return args.seed
    return cfg.seed if cfg is not None else 0


# ---------------------------------------------------------------------------
# Report writers (comma-delimited tables with header rows)


def _write_eval_report(fh, report: EvalReport):
    fh.write("class,accuracy_percent\n")
    for cls, pct in report.per_class:
        fh.write(f"{cls},{pct:.2f}\n")
    fh.write(f"overall,{report.overall:.2f}\n")
    fh.write("\n")
    fh.write("confusion," + ",".join(report.classes) + "\n")
    for i, cls in enumerate(report.classes):
        row = ",".join(str(int(v)) for v in report.confusion[i])
        fh.write(f"{cls},{row}\n")
    if report.split:
        fh.write(f"\nsplit,{report.split}\n")


def _write_predictions(fh, video_ids, predictions):
    fh.write("video_id,prediction\n")
    for vid, pred in zip(video_ids, predictions):
        fh.write(f"{vid},{pred}\n")


def _write_sweep(fh, rows):
    fh.write("size,rate_percent,m_factor\n")
    for r in rows:
        fh.write(f"{r.reduced_size},{r.classification_rate:.2f},{r.m_factor:.4f}\n")


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args) -> int:
    spec_path = _require(args.data, "a generator spec path", "synth")
    out = _require(args.out, "--out", "synth")
    try:
        with open(spec_path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read generator spec {spec_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"generator spec {spec_path} is not valid JSON: {exc}") from None
    spec = synth_spec_from_json(obj)
    dataset = synth_dataset(spec, _resolve_seed(args))
    save_dataset(dataset, out)
    n_points = sum(v.n_points for v in dataset.videos)
    print(f"wrote {len(dataset.videos)} videos ({n_points} interest points) to {out}")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(_require(args.config, "--config", "fit"))
    out = _require(args.out, "--out", "fit")
    _echo_config(cfg)
    seed = _resolve_seed(args, cfg)
    dataset = load_dataset(_require(args.data, "a feature file", "fit"))
    fp = fit_pipeline(dataset, cfg, seed=seed)
    bundle = bundle_from_pipeline(fp, dataset.videos)
    save_bundle(bundle, out)
    man = bundle.manifest
    print(f"vocabulary: {man['orig_word_count']} words"
          + (f" reduced to {man['word_count']}"
             if man["word_count"] != man["orig_word_count"] else ""))
    print(f"trained on {len(dataset.videos)} videos; bundle written to {out}")
    print(f"training accuracy: {man['train']['accuracy_percent']:.2f}%")
    return 0


def cmd_predict(args) -> int:
    out = _require(args.out, "--out", "predict")
    bundle = load_bundle(_require(args.bundle, "a bundle directory", "predict"))
    print("bundle configuration:")
    print(json.dumps(bundle.manifest["config"], indent=2, sort_keys=True))
    fp = pipeline_from_bundle(bundle)
    dataset = load_dataset(_require(args.data, "a feature file", "predict"))
    preds, _ = predict_videos(fp, dataset.videos)
    ids = [v.video_id for v in dataset.videos]
    labeled = all(v.action_class is not None for v in dataset.videos)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        if labeled:
            report = evaluate(preds, [v.action_class for v in dataset.videos],
                              split=f"predict on {args.data}")
            _write_eval_report(fh, report)
            fh.write("\n")
        _write_predictions(fh, ids, preds)
    if labeled:
        print(f"predicted {len(preds)} videos; accuracy {report.overall:.2f}%; "
              f"report written to {out}")
    else:
        print(f"predicted {len(preds)} videos; predictions written to {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(_require(args.config, "--config", "sweep"))
    out = _require(args.out, "--out", "sweep")
    _echo_config(cfg)
    seed = _resolve_seed(args, cfg)
    if cfg.replay_rows:
        orig = cfg.replay_orig_size if cfg.replay_orig_size is not None else cfg.vocab_k
        rows = []
        for size, rate in cfg.replay_rows:
            try:
                rows.append(TradeoffRow(
                    reduced_size=size,
                    classification_rate=rate,
                    m_factor=tradeoff_factor(size, orig, rate),
                    orig_size=orig,
                ))
            except ValueError as exc:
                raise ConfigError(f"reduce.replay size {size}: {exc}") from None
        rows.sort(key=lambda r: r.reduced_size)
        best = min(rows, key=lambda r: (-r.m_factor, r.reduced_size)).reduced_size
    elif cfg.sweep_sizes:
        dataset = load_dataset(_require(args.data, "a feature file", "sweep"))
        vocab = build_vocabulary(
            dataset, k=cfg.vocab_k, sample_size=cfg.vocab_sample_size,
            seed=seed_key(seed, 1))
        rows, best = sweep_tradeoff(dataset, vocab, cfg.sweep_sizes, cfg, seed=seed)
    else:
        raise ConfigError(
            "sweep requires reduce.sweep sizes or reduce.replay rows in the configuration")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        _write_sweep(fh, rows)
    best_row = next(r for r in rows if r.reduced_size == best)
    print(f"wrote {len(rows)} rows to {out}")
    print(f"best size: {best} (M = {best_row.m_factor:.4f} "
          f"at {best_row.classification_rate:.2f}%)")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(_require(args.config, "--config", "eval"))
    out = _require(args.out, "--out", "eval")
    _echo_config(cfg)
    seed = _resolve_seed(args, cfg)
    dataset = load_dataset(_require(args.data, "a feature file", "eval"))
    report = cross_validate(dataset, cfg, seed=seed)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        _write_eval_report(fh, report)
    print(f"evaluated {int(report.confusion.sum())} held-out predictions "
          f"({report.split})")
    print(f"overall accuracy: {report.overall:.2f}%")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        _check_threads(args)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StcoocError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
