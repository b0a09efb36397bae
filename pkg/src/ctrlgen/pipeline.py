"""End-to-end experiment plumbing: ingest, train, evaluate and the grid runner."""

from __future__ import annotations

import json
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import BagOfEmbeddingsClassifier
from .config import ExperimentConfig, for_cell, to_dict
from .controls import LexiconClassifier
from .data import (
    DataError,
    Splits,
    Vocabulary,
    annotate_controls,
    balance_by_control,
    filter_length,
    load_splits,
    make_splits,
    read_tsv,
    save_splits,
    synth_corpus,
)
from .evaluation import EvalReport, IntervalReport, format_table, range_report
from .models import ConfigError, ModelConfig, Seq2SeqModel, build_model
from .training import TrainLog, train

log = logging.getLogger(__name__)

CHECKPOINT = "model.ctgn"
CLASSIFIER = "classifier.ctgn"


# ---------------------------------------------------------------------------
# data


def load_corpus(cfg: ExperimentConfig) -> list:
    """Annotated, length-filtered examples from the configured TSV or the synthetic grammar."""
    d = cfg.data
    if d.corpus:
        try:
            examples = read_tsv(d.corpus, cfg.task)
        except OSError as exc:
            raise DataError(f"cannot read corpus {d.corpus}: {exc}") from exc
    else:
        examples = synth_corpus(cfg.task, d.synth_size, d.synth_min_len, d.synth_max_len, cfg.seed)
    examples = [ex for ex in examples if ex.target]
    if cfg.task == "edit":
        examples = [ex for ex in examples if ex.source]
    examples = filter_length(examples, cfg.max_target_len())
    if not examples:
        raise DataError("corpus is empty after filtering")
    return annotate_controls(examples, cfg.task)


def ingest(cfg: ExperimentConfig) -> Splits:
    d = cfg.data
    splits = make_splits(load_corpus(cfg), cfg.range_split(), tuple(d.fractions), cfg.seed, cfg.group_by_source())
    if cfg.balance():
        splits.train = balance_by_control(splits.train, cfg.seed)
        splits.valid = balance_by_control(splits.valid, cfg.seed + 1)
        splits.test_all = balance_by_control(splits.test_all, cfg.seed + 2)
    splits.train = splits.train[: d.max_train]
    splits.valid = splits.valid[: d.max_valid]
    splits.test_all = splits.test_all[: d.max_test]
    keep = {ex.id for ex in splits.test_all}
    splits.tests = {k: [ex for ex in v if ex.id in keep] for k, v in splits.tests.items()}
    return splits


def build_vocab(splits: Splits) -> Vocabulary:
    seqs = [ex.target for ex in splits.train]
    seqs += [ex.source for ex in splits.train if ex.source]
    return Vocabulary.build(seqs)


def data_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.experiment.workdir) / "data" / cfg.data_digest()


def prepare_data(cfg: ExperimentConfig) -> tuple[Splits, Vocabulary, Path]:
    """Splits and vocabulary, cached under a directory named by the data config hash."""
    out = data_dir(cfg)
    if (out / "vocab.json").exists():
        splits = load_splits(out)
        vocab = Vocabulary.from_list(json.loads((out / "vocab.json").read_text(encoding="utf-8")))
        return splits, vocab, out
    splits = ingest(cfg)
    vocab = build_vocab(splits)
    save_splits(out, splits)
    (out / "vocab.json").write_text(json.dumps(vocab.to_list()) + "\n", encoding="utf-8")
    return splits, vocab, out


# ---------------------------------------------------------------------------
# models on disk


def save_model(path, model: Seq2SeqModel, vocab: Vocabulary, cfg: ExperimentConfig | None = None) -> None:
    header = {"kind": "ctrlgen_model", "model": model.config.to_dict(), "vocab": vocab.to_list()}
    if cfg is not None:
        header["experiment"] = to_dict(cfg)
    save_checkpoint(path, header, model.state_dict())


def load_model(path) -> tuple[Seq2SeqModel, Vocabulary, dict]:
    header, params = load_checkpoint(path)
    if header.get("kind") != "ctrlgen_model":
        raise DataError(f"{path} is not a model checkpoint")
    with T.default_dtype(np.float32):
        model = build_model(ModelConfig.from_dict(header["model"]))
    model.load_state_dict(params)
    return model, Vocabulary.from_list(header["vocab"]), header


def train_model(cfg: ExperimentConfig, splits: Splits, vocab: Vocabulary) -> tuple[Seq2SeqModel, TrainLog]:
    tc = cfg.train_config()
    dtype = np.float32 if tc.precision == "float32" else np.float64
    with T.default_dtype(dtype):
        model = build_model(cfg.model_config(len(vocab)), cfg.seed)
        history = train(model, vocab, splits.train, splits.valid, tc)
    return model, history


def classifier_for(cfg: ExperimentConfig, splits: Splits, vocab: Vocabulary, directory: Path | None = None):
    """Sentiment scorer for generated text; None for other tasks."""
    if cfg.task != "sentiment":
        return None
    choice = cfg.experiment.classifier
    if choice == "lexicon" or (choice == "auto" and not cfg.data.corpus):
        return LexiconClassifier()
    path = None if directory is None else directory / CLASSIFIER
    if path is not None and path.exists():
        return BagOfEmbeddingsClassifier.load(path)
    clf = BagOfEmbeddingsClassifier(vocab, seed=cfg.seed)
    with T.default_dtype(np.float64):
        clf.fit(splits.train, seed=cfg.seed)
    if path is not None:
        clf.save(path)
    return clf


def evaluate_model(cfg: ExperimentConfig, model: Seq2SeqModel, vocab: Vocabulary, splits: Splits,
                   clf=None, baseline: Seq2SeqModel | None = None) -> EvalReport:
    with T.default_dtype(model.dtype):
        return range_report(model, vocab, splits.tests, cfg.decode_config(), clf, baseline,
                            cfg.decode.max_generations or None)


# ---------------------------------------------------------------------------
# cells and grid


def cell_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.experiment.workdir) / "cells" / cfg.digest()


def run_cell(cfg: ExperimentConfig) -> EvalReport:
    """Train and evaluate one configuration; a finished cell is reused as is."""
    out = cell_dir(cfg)
    report_path = out / "report.json"
    if report_path.exists():
        return report_from_json(report_path.read_text(encoding="utf-8"))
    cfg.model_config(vocab_size=8)  # construction check before any work
    splits, vocab, ddir = prepare_data(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    model, history = train_model(cfg, splits, vocab)
    history.write(out / "train_log.csv")
    save_model(out / CHECKPOINT, model, vocab, cfg)
    report = evaluate_model(cfg, model, vocab, splits, classifier_for(cfg, splits, vocab, ddir))
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def report_from_json(text: str) -> EvalReport:
    d = json.loads(text)
    d["intervals"] = [IntervalReport(**r) for r in d["intervals"]]
    return EvalReport(**d)


@dataclass
class GridResult:
    reports: list[tuple[int, EvalReport]] = field(default_factory=list)
    skipped: list[tuple[str, int, str, str]] = field(default_factory=list)  # (task, seed, family:strategy, reason)
    failed: list[tuple[str, int, str, str]] = field(default_factory=list)

    def sections(self) -> list[tuple[str, int]]:
        keys = [(r.kind, s) for s, r in self.reports]
        keys += [(t, s) for t, s, _, _ in self.skipped + self.failed]
        return list(dict.fromkeys(keys))

    def table(self) -> str:
        parts = []
        for task, seed in self.sections():
            reps = [r for s, r in self.reports if (r.kind, s) == (task, seed)]
            rows = [(lab, why) for t, s, lab, why in self.skipped if (t, s) == (task, seed)]
            rows += [(lab, f"failed: {why}") for t, s, lab, why in self.failed if (t, s) == (task, seed)]
            parts.append(f"task {task} seed {seed}\n" + format_table(reps, rows))
        return "\n".join(parts)

    def to_json(self) -> str:
        d = {
            "reports": [{"seed": s, **r.to_dict()} for s, r in self.reports],
            "skipped": [{"task": t, "seed": s, "cell": c, "reason": why} for t, s, c, why in self.skipped],
            "failed": [{"task": t, "seed": s, "cell": c, "reason": why} for t, s, c, why in self.failed],
        }
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def grid_cells(cfg: ExperimentConfig) -> list[tuple[int, str, str]]:
    strategies = list(cfg.grid.strategies)
    if cfg.grid.no_control and "none" not in strategies:
        strategies = ["none"] + strategies
    return [(int(s), fam, strat) for s in cfg.grid.seeds for fam in cfg.grid.families for strat in strategies]


def run_grid(configs: list[ExperimentConfig], out_dir=None) -> GridResult:
    """Run every cell of every config, then write the merged table and JSON.

    Cells that fail construction become SKIPPED rows; cells that crash later
    are recorded and the grid moves on.
    """
    result = GridResult()
    for base in configs:
        for seed, family, strategy in grid_cells(base):
            cell = for_cell(base, family, strategy, seed)
            label = f"{family}:{'no_control' if strategy == 'none' else strategy}"
            try:
                cell.model_config(vocab_size=8)
            except ConfigError as exc:
                result.skipped.append((cell.task, seed, label, str(exc)))
                continue
            try:
                result.reports.append((seed, run_cell(cell)))
            except Exception as exc:  # noqa: BLE001 - a crashing cell must not stop the grid
                log.error("cell %s seed %d failed: %s", label, seed, exc)
                log.debug(traceback.format_exc())
                result.failed.append((cell.task, seed, label, f"{type(exc).__name__}: {exc}"))
    out = Path(out_dir if out_dir is not None else Path(configs[0].experiment.workdir) / "report")
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.txt").write_text(result.table(), encoding="utf-8")
    (out / "report.json").write_text(result.to_json(), encoding="utf-8")
    return result
