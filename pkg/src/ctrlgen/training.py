"""Teacher-forced maximum-likelihood training."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .batching import length_buckets, make_batch
from .data import Example, Vocabulary
from .evaluation import perplexity
from .optim import SGD, Adam, clip_grad_norm

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0
    seed: int = 0
    patience: int = 3
    precision: str = "float32"

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.precision not in ("float32", "float64"):
            raise ValueError(f"precision must be float32 or float64, got {self.precision!r}")


@dataclass
class TrainLog:
    rows: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_ppl: float = math.inf

    def csv(self) -> str:
        lines = ["epoch,train_loss,valid_ppl"]
        lines += [f"{e},{loss:.6f},{ppl:.6f}" for e, loss, ppl in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.csv(), encoding="utf-8")


def nll_loss(logits: T.Tensor, gold, pad_id: int = 0) -> T.Tensor:
    """Mean over non-PAD positions of -log softmax(logits)[gold]."""
    gold = np.asarray(gold, dtype=np.int64).reshape(-1)
    mask = gold != pad_id
    if not mask.any():
        raise ValueError("nll_loss: every gold position is PAD")
    return T.cross_entropy(logits, gold, mask)


def batch_loss(model, batch) -> T.Tensor:
    logits = model.forward(batch)
    return T.cross_entropy(logits, batch.targets.reshape(-1), batch.mask.reshape(-1))


def train(model, vocab: Vocabulary, train_set: Sequence[Example], valid_set: Sequence[Example],
          cfg: TrainConfig = TrainConfig()) -> TrainLog:
    """Adam/SGD with global-norm clipping; restores the best-validation parameters at the end."""
    kind = model.config.control.kind
    params = model.parameters()
    if cfg.optimizer == "adam":
        opt = Adam(params, cfg.learning_rate, (cfg.beta1, cfg.beta2), cfg.eps)
    else:
        opt = SGD(params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history = TrainLog()
    best_state = model.state_dict()
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        total, tokens = 0.0, 0
        for chunk in length_buckets(train_set, cfg.batch_size, rng):
            batch = make_batch(chunk, vocab, kind)
            opt.zero_grad()
            loss = batch_loss(model, batch)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            T.backward(loss)
            clip_grad_norm(params, cfg.grad_clip)
            opt.step()
            total += value * batch.n_tokens
            tokens += batch.n_tokens
        ppl = perplexity(model, vocab, valid_set)
        if not math.isfinite(ppl):
            raise DivergenceError(f"non-finite validation perplexity at epoch {epoch}")
        history.rows.append((epoch, total / tokens, ppl))
        log.info("epoch %d train_loss %.4f valid_ppl %.4f", epoch, total / tokens, ppl)
        if ppl < history.best_ppl:
            history.best_ppl, history.best_epoch = ppl, epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best_state)
    return history
