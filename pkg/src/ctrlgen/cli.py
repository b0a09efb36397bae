"""``ctrlgen`` command line: synth, ingest, train, evaluate, generate, curve and grid.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import tensor as T
from .checkpoint import CheckpointError
from .config import SEED_ENV, ExperimentConfig, flag_names, from_dict, parse_config, set_value
from .data import DataError, Interval, detokenize, synth_corpus, tokenize, write_tsv
from .decoding import generate
from .evaluation import curve_csv, emit_curve, format_table
from .models import ConfigError
from .training import DivergenceError
from . import pipeline

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4


def _add_config_flags(p: argparse.ArgumentParser, repeat_config: bool = False) -> None:
    if repeat_config:
        p.add_argument("--config", action="append", default=[], help="config file (repeatable)")
    else:
        p.add_argument("--config", help="config file with [section] key = value lines")
    group = p.add_argument_group("config keys (override the file)")
    for section, key in flag_names():
        group.add_argument(f"--{section}.{key}", dest=f"cfg:{section}.{key}", metavar="V")


def _overrides(args) -> dict[str, str]:
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}


def _config(args, path=None, check_model: bool = True) -> ExperimentConfig:
    path = args.config if path is None else path
    try:
        text = Path(path).read_text(encoding="utf-8") if path else ""
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, _overrides(args), check_model=check_model)


def _checkpoint_config(args, header: dict) -> ExperimentConfig:
    """Experiment settings stored with the model, then the file and flag overrides."""
    cfg = from_dict(header["experiment"]) if "experiment" in header else ExperimentConfig()
    if args.config:
        cfg = _config(args, check_model=False)
    else:
        for dotted, value in _overrides(args).items():
            section, _, key = dotted.partition(".")
            set_value(cfg, section, key, value)
        if os.environ.get(SEED_ENV):
            set_value(cfg, "experiment", "seed", os.environ[SEED_ENV])
    return cfg.validate(check_model=False)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    exs = synth_corpus(args.task, args.n, args.lo, args.hi, args.seed)
    write_tsv(args.out, exs)
    print(f"wrote {len(exs)} {args.task} examples to {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _config(args)
    splits, vocab, out = pipeline.prepare_data(cfg)
    for name, n in splits.counts().items():
        print(f"{name}\t{n}")
    print(f"vocabulary\t{len(vocab)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    splits, vocab, ddir = pipeline.prepare_data(cfg)
    model, history = pipeline.train_model(cfg, splits, vocab)
    out = Path(args.out) if args.out else pipeline.cell_dir(cfg) / pipeline.CHECKPOINT
    pipeline.save_model(out, model, vocab, cfg)
    history.write(out.with_suffix(".log.csv"))
    print(history.csv(), end="")
    print(f"best epoch {history.best_epoch} valid_ppl {history.best_ppl:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, vocab, header = pipeline.load_model(args.checkpoint)
    cfg = _checkpoint_config(args, header)
    splits, _, ddir = pipeline.prepare_data(cfg)
    clf = pipeline.classifier_for(cfg, splits, vocab, ddir)
    baseline = pipeline.load_model(args.baseline)[0] if args.baseline else None
    report = pipeline.evaluate_model(cfg, model, vocab, splits, clf, baseline)
    print(format_table([report]), end="")
    if report.baseline_ppl is not None:
        print(f"baseline ppl {report.baseline_ppl:.4f}")
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _scorer(cfg: ExperimentConfig, vocab):
    if cfg.task != "sentiment":
        return None
    splits, _, ddir = pipeline.prepare_data(cfg)
    return pipeline.classifier_for(cfg, splits, vocab, ddir)


def cmd_generate(args) -> int:
    model, vocab, header = pipeline.load_model(args.checkpoint)
    cfg = _checkpoint_config(args, header)
    dc = cfg.decode_config()
    source = None if args.source is None else tokenize(args.source)
    index = 0
    with T.default_dtype(model.dtype):
        for c in args.c:
            for _ in range(args.n):
                tokens = generate(model, vocab, c, source, dc, index)
                index += 1
                print(f"c={c}\t{detokenize(tokens)}")
    return EXIT_OK


def cmd_curve(args) -> int:
    model, vocab, header = pipeline.load_model(args.checkpoint)
    cfg = _checkpoint_config(args, header)
    if model.config.has_encoder:
        raise ConfigError("curve needs an unconditional decoder; this model has an encoder")
    values = Interval.parse(args.range).values()
    with T.default_dtype(model.dtype):
        points = emit_curve(model, vocab, values, cfg.decode_config(), args.samples, _scorer(cfg, vocab))
    text = curve_csv(points)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_grid(args) -> int:
    paths = args.config or [None]
    configs = [_config(args, path=p, check_model=False) for p in paths]
    result = pipeline.run_grid(configs, args.out)
    print(result.table(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctrlgen", description="controllable text generation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus as TSV")
    p.add_argument("--task", choices=["length", "edit", "sentiment"], default="length")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--lo", type=int, default=3)
    p.add_argument("--hi", type=int, default=18)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="split a corpus into train/valid/test by control range")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one model")
    _add_config_flags(p)
    p.add_argument("--out", help="checkpoint path (default: the cell directory)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="per-interval PPL, BLEU, accuracy and MSE")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--baseline", help="no_control checkpoint to report PPL against")
    p.add_argument("--out", help="write the report as JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="generate text for desired control values")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--c", type=int, nargs="+", required=True, help="desired control values")
    p.add_argument("--n", type=int, default=1, help="outputs per value")
    p.add_argument("--source", help="source sentence for encoder models")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("curve", help="desired vs realized control CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--range", default="3..18")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("grid", help="train and evaluate every strategy x family x seed cell")
    _add_config_flags(p, repeat_config=True)
    p.add_argument("--out", help="merged report directory (default: <workdir>/report)")
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
