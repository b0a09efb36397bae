"""Experiment configuration: INI files, flag overrides and derived settings.

A config file has ``[section]`` headers and ``key = value`` lines.  Sections
mirror the dataclasses below (``[experiment]``, ``[data]``, ``[model]``,
``[control]``, ``[train]``, ``[decode]``, ``[grid]``).  Every key can also be
given on the command line as ``--section.key value``; flags win over the file.

Lists may be written as JSON (``["3..12", "13..18"]``) or comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .controls import KIND_RANGES
from .data import GRAMMAR_MAX_LEN, RangeSplit
from .decoding import DecodeConfig
from .models import ConfigError, ControlSpec, ModelConfig
from .training import TrainConfig

TASKS = ("length", "edit", "sentiment")
SEED_ENV = "CTRLGEN_SEED"


@dataclass
class ExperimentSection:
    task: str = "length"
    seed: int = 0
    workdir: str = "runs"
    classifier: str = "auto"  # lexicon | trained | auto (lexicon for synthetic corpora)


@dataclass
class DataSection:
    corpus: str = ""  # TSV path; empty means a synthetic corpus
    synth_size: int = 10000
    synth_min_len: int = 3
    synth_max_len: int = 18
    observed: str = "3..12"
    evaluated: list = field(default_factory=lambda: ["3..12", "13..18"])
    fractions: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    max_target_len: int = 0  # 0: 30 for length/edit, 100 for sentiment
    max_train: int = 100000
    max_valid: int = 10000
    max_test: int = 10000
    group_by_source: str = "auto"  # auto groups paraphrase pairs by source
    balance: str = "auto"  # equal examples per rating in every split; auto: sentiment only


@dataclass
class ModelSection:
    family: str = "lstm"
    token_dim: int = 64
    hidden_dim: int = 128
    n_layers: int = 1
    n_heads: int = 4
    encoder: str = "auto"  # auto: an encoder for the edit task only
    max_seq_len: int = 0  # 0: derived from the data and decode.max_len


@dataclass
class ControlSection:
    strategy: str = "scalar"
    dim: int = 8
    tracker: str = "auto"  # auto: on, except for sentiment which has none
    scale: float = 1.0
    value_max: int = 0  # 0: derived from the data and evaluation ranges


@dataclass
class TrainSection:
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0
    patience: int = 3
    precision: str = "float32"


@dataclass
class DecodeSection:
    mode: str = "greedy"
    temperature: float = 1.0
    max_len: int = 0  # 0: 1.5x the top of the evaluation range (length), else 50
    batch_size: int = 256
    max_generations: int = 0  # per interval; 0 generates for every test example


@dataclass
class GridSection:
    families: list = field(default_factory=lambda: ["lstm"])
    strategies: list = field(default_factory=lambda: ["learnable", "sinusoidal", "scalar", "scalar_repeat"])
    seeds: list = field(default_factory=lambda: [0])
    no_control: bool = True


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    control: ControlSection = field(default_factory=ControlSection)
    train: TrainSection = field(default_factory=TrainSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    grid: GridSection = field(default_factory=GridSection)

    # ------------------------------------------------------------------ shortcuts

    @property
    def task(self) -> str:
        return self.experiment.task

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def with_values(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with ``section__key=value`` overrides (validated)."""
        cfg = from_dict(to_dict(self))
        for key, value in overrides.items():
            section, name = key.split("__", 1)
            set_value(cfg, section, name, value)
        cfg.validate()
        return cfg

    # ------------------------------------------------------------------ derived settings

    def range_split(self) -> RangeSplit:
        try:
            return RangeSplit.parse(self.data.observed, list(self.data.evaluated))
        except ValueError as exc:
            raise ConfigError(f"bad range: {exc}") from exc

    def has_encoder(self) -> bool:
        enc = self.model.encoder
        return self.task == "edit" if enc == "auto" else _as_bool(enc, "model.encoder")

    def has_tracker(self) -> bool:
        tr = self.control.tracker
        return self.task != "sentiment" if tr == "auto" else _as_bool(tr, "control.tracker")

    def group_by_source(self) -> bool:
        g = self.data.group_by_source
        return self.task == "edit" if g == "auto" else _as_bool(g, "data.group_by_source")

    def balance(self) -> bool:
        b = self.data.balance
        return self.task == "sentiment" if b == "auto" else _as_bool(b, "data.balance")

    def max_target_len(self) -> int:
        if self.data.max_target_len:
            return self.data.max_target_len
        return 100 if self.task == "sentiment" else 30

    def value_range(self) -> tuple[int, int]:
        if self.task in KIND_RANGES:
            return KIND_RANGES[self.task]
        if self.control.value_max:
            return (0, self.control.value_max)
        tops = [self.data.synth_max_len, self.max_target_len() if self.data.corpus else 0]
        split = self.range_split()
        tops += [iv.hi for iv in (*split.observed, *split.evaluated) if iv.hi is not None]
        return (0, max(tops))

    def decode_max_len(self) -> int:
        if self.decode.max_len:
            return self.decode.max_len
        if self.task == "length":
            return math.ceil(1.5 * self.value_range()[1])
        return 50

    def control_spec(self, strategy: str | None = None) -> ControlSpec:
        strategy = self.control.strategy if strategy is None else strategy
        return ControlSpec(
            kind=self.task,
            strategy=strategy,
            dim=self.control.dim,
            value_range=self.value_range(),
            tracker=self.has_tracker(),
            tracker_range=(0, max(self.decode_max_len(), self.max_target_len())),
            scale=self.control.scale,
        )

    def model_config(self, vocab_size: int) -> ModelConfig:
        seq = self.model.max_seq_len or max(self.decode_max_len(), self.max_target_len()) + 2
        return ModelConfig(
            family=self.model.family,
            vocab_size=vocab_size,
            token_dim=self.model.token_dim,
            hidden_dim=self.model.hidden_dim,
            n_layers=self.model.n_layers,
            n_heads=self.model.n_heads,
            control=self.control_spec(),
            has_encoder=self.has_encoder(),
            max_seq_len=seq,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **dataclasses.asdict(self.train))

    def decode_config(self) -> DecodeConfig:
        d = self.decode
        return DecodeConfig(d.mode, d.temperature, self.decode_max_len(), self.seed, d.batch_size)

    # ------------------------------------------------------------------ checks

    def validate(self, check_model: bool = True) -> "ExperimentConfig":
        """Raise ConfigError unless the config is internally consistent.

        Grid configs pass ``check_model=False``: their cells are checked one
        by one so that an infeasible cell is skipped instead of fatal.
        """
        if self.task not in TASKS:
            raise ConfigError(f"experiment.task must be one of {TASKS}, got {self.task!r}")
        if self.experiment.classifier not in ("auto", "lexicon", "trained"):
            raise ConfigError(f"experiment.classifier must be auto, lexicon or trained, got {self.experiment.classifier!r}")
        if self.task == "sentiment" and self.control.tracker not in ("auto",) and self.has_tracker():
            raise ConfigError("the sentiment task has no current-value tracker; set control.tracker = false")
        if len(self.data.fractions) != 3 or any(f < 0 for f in self.data.fractions) or sum(self.data.fractions) <= 0:
            raise ConfigError(f"data.fractions must be three non-negative numbers, got {self.data.fractions}")
        if not self.data.corpus and not 3 <= self.data.synth_min_len <= self.data.synth_max_len <= GRAMMAR_MAX_LEN:
            raise ConfigError(
                f"synthetic lengths {self.data.synth_min_len}..{self.data.synth_max_len} must lie in 3..{GRAMMAR_MAX_LEN}"
            )
        self.range_split()
        self.has_encoder(), self.group_by_source(), self.balance()
        try:
            self.train_config()
            self.decode_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if check_model:
            # divisibility and width checks with a placeholder vocabulary size
            self.model_config(vocab_size=8)
        for fam in self.grid.families:
            if fam not in ("lstm", "transformer"):
                raise ConfigError(f"grid.families: unknown family {fam!r}")
        for strat in self.grid.strategies:
            if strat not in ("learnable", "sinusoidal", "scalar", "scalar_repeat", "none"):
                raise ConfigError(f"grid.strategies: unknown strategy {strat!r}")
        return self

    def digest(self) -> str:
        """Hash of everything that affects a single cell's artifacts."""
        d = to_dict(self)
        d.pop("grid")
        d["experiment"].pop("workdir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def data_digest(self) -> str:
        d = {"data": to_dict(self)["data"], "task": self.task, "seed": self.seed}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# (de)serialization


def _as_bool(value, key: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _convert(value, kind, key: str):
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if kind is bool:
            return _as_bool(text, key)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is list:
            if text.startswith("["):
                return json.loads(text)
            items = [x.strip() for x in text.split(",") if x.strip()]
            return [_scalar(x) for x in items]
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from exc
    return text


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _section_types(section_cls) -> dict[str, type]:
    hints = typing.get_type_hints(section_cls)
    return {f.name: hints[f.name] for f in fields(section_cls)}


def set_value(cfg: ExperimentConfig, section: str, key: str, value) -> None:
    if section not in {f.name for f in fields(ExperimentConfig)}:
        raise ConfigError(f"unknown config section [{section}]")
    obj = getattr(cfg, section)
    types = _section_types(type(obj))
    if key not in types:
        raise ConfigError(f"unknown config key {section}.{key}")
    setattr(obj, key, _convert(value, types[key], f"{section}.{key}"))


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def from_dict(d: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for section, values in d.items():
        for key, value in values.items():
            set_value(cfg, section, key, value)
    return cfg


def parse_config(text: str, overrides: dict[str, Any] | None = None, env: dict | None = None,
                 check_model: bool = True) -> ExperimentConfig:
    """Parse INI text, apply ``section.key`` overrides, then the seed env var."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        for key, value in parser.items(section):
            set_value(cfg, section, key, value)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        set_value(cfg, section, key, value)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        set_value(cfg, "experiment", "seed", env[SEED_ENV])
    return cfg.validate(check_model)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None,
                check_model: bool = True) -> ExperimentConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides, check_model=check_model)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, values in to_dict(cfg).items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            lines.append(f"{key} = {json.dumps(value) if isinstance(value, list) else value}")
        lines.append("")
    return "\n".join(lines)


def flag_names() -> list[tuple[str, str]]:
    """Every (section, key) pair, for building command-line flags."""
    return [(f.name, g.name) for f in fields(ExperimentConfig) for g in fields(f.default_factory)]


def for_cell(cfg: ExperimentConfig, family: str, strategy: str, seed: int) -> ExperimentConfig:
    """Single-cell config carved out of a grid config."""
    out = from_dict(to_dict(cfg))
    out.model = replace(out.model, family=family)
    out.control = replace(out.control, strategy=strategy)
    out.experiment = replace(out.experiment, seed=int(seed))
    return out

