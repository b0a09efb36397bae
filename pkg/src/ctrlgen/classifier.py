"""Bag-of-embeddings sentiment classifier used to label generated text."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .controls import content
from .data import Example, Vocabulary
from .optim import Adam


class BagOfEmbeddingsClassifier:
    """Mean of token embeddings -> linear -> softmax over ratings 1..n_classes."""

    def __init__(self, vocab: Vocabulary, dim: int = 32, n_classes: int = 5, seed: int = 0):
        self.vocab = vocab
        self.n_classes = n_classes
        self.dim = dim
        rng = np.random.default_rng(seed)
        self.emb = T.parameter(rng.uniform(-0.1, 0.1, size=(len(vocab), dim)))
        bound = 1.0 / np.sqrt(dim)
        self.w = T.parameter(rng.uniform(-bound, bound, size=(dim, n_classes)))
        self.b = T.parameter(rng.uniform(-bound, bound, size=(n_classes,)))

    def parameters(self) -> list[T.Tensor]:
        return [self.emb, self.w, self.b]

    def _logits(self, seqs: Sequence[Sequence[str]]) -> T.Tensor:
        width = max(len(s) for s in seqs)
        ids = np.zeros((len(seqs), width), dtype=np.int64)
        weights = np.zeros((len(seqs), width))
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = self.vocab.encode(s)
            weights[i, : len(s)] = 1.0 / len(s)
        e = T.embedding(self.emb, ids)  # [B, W, D]
        pooled = T.sum_(T.apply_mask(e, np.repeat(weights[:, :, None], self.dim, axis=2).astype(e.dtype)), axis=1)
        return T.linear(pooled, self.w, self.b)

    def fit(self, examples: Sequence[Example], epochs: int = 5, lr: float = 1e-2, batch_size: int = 64,
            seed: int = 0) -> list[float]:
        exs = [ex for ex in examples if content(ex.target)]
        opt = Adam(self.parameters(), lr)
        rng = np.random.default_rng(seed)
        losses = []
        for _ in range(epochs):
            order = rng.permutation(len(exs))
            total = 0.0
            for lo in range(0, len(order), batch_size):
                chunk = [exs[i] for i in order[lo : lo + batch_size]]
                opt.zero_grad()
                loss = T.cross_entropy(self._logits([content(ex.target) for ex in chunk]),
                                       [ex.c - 1 for ex in chunk])
                T.backward(loss)
                opt.step()
                total += loss.item() * len(chunk)
            losses.append(total / len(exs))
        return losses

    def predict_proba(self, tokens: Sequence[str]) -> np.ndarray:
        with T.no_grad():
            logits = self._logits([content(tokens)]).data[0]
        p = np.exp(logits - logits.max())
        return p / p.sum()

    def accuracy(self, examples: Sequence[Example]) -> float:
        hits = sum(int(np.argmax(self.predict_proba(ex.target))) + 1 == ex.c for ex in examples)
        return 100.0 * hits / len(examples)

    def save(self, path) -> None:
        header = {"kind": "sentiment_classifier", "dim": self.dim, "n_classes": self.n_classes,
                  "vocab": self.vocab.to_list()}
        save_checkpoint(path, header, {"emb": self.emb.data, "w": self.w.data, "b": self.b.data})

    @classmethod
    def load(cls, path) -> "BagOfEmbeddingsClassifier":
        header, params = load_checkpoint(path)
        clf = cls(Vocabulary.from_list(header["vocab"]), header["dim"], header["n_classes"])
        clf.emb.data, clf.w.data, clf.b.data = (params[k].astype(np.float64) for k in ("emb", "w", "b"))
        return clf
