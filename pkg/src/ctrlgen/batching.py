from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controls import prefix_values
from .data import Example, Vocabulary


@dataclass
class Batch:
    inputs: np.ndarray  # [B, T] BOS + target
    targets: np.ndarray  # [B, T] target + EOS, PAD after
    mask: np.ndarray  # [B, T] 1.0 on real positions
    desired: np.ndarray  # [B]
    trackers: np.ndarray  # [B, T] running control value before each input token
    source: np.ndarray | None = None  # [B, S]
    source_mask: np.ndarray | None = None  # [B, S] bool

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_tokens(self) -> int:
        return int(self.mask.sum())


def teacher_forced_controls(example: Example, kind: str) -> tuple[int, list[int]]:
    """Desired value and the tracker value fed at each decoder step (len(target) + 1 steps).

    The value at step t is computed on the gold prefix target[:t].
    """
    if kind == "sentiment":
        return int(example.c), []
    return int(example.c), prefix_values(kind, example.target, example.source)


def make_batch(examples: Sequence[Example], vocab: Vocabulary, kind: str) -> Batch:
    b = len(examples)
    t = max(len(ex.target) for ex in examples) + 1
    inputs = np.full((b, t), vocab.pad_id, dtype=np.int64)
    targets = np.full((b, t), vocab.pad_id, dtype=np.int64)
    mask = np.zeros((b, t))
    desired = np.zeros(b, dtype=np.int64)
    trackers = np.zeros((b, t), dtype=np.int64)
    for i, ex in enumerate(examples):
        ids = vocab.encode(ex.target)
        n = len(ids)
        inputs[i, 0] = vocab.bos_id
        inputs[i, 1 : n + 1] = ids
        targets[i, :n] = ids
        targets[i, n] = vocab.eos_id
        mask[i, : n + 1] = 1.0
        c, tr = teacher_forced_controls(ex, kind)
        desired[i] = c
        if tr:
            trackers[i, : n + 1] = tr
    source = source_mask = None
    if examples[0].source is not None:
        s = max(len(ex.source) for ex in examples)
        source = np.full((b, s), vocab.pad_id, dtype=np.int64)
        source_mask = np.zeros((b, s), dtype=bool)
        for i, ex in enumerate(examples):
            ids = vocab.encode(ex.source)
            source[i, : len(ids)] = ids
            source_mask[i, : len(ids)] = True
    return Batch(inputs, targets, mask, desired, trackers, source, source_mask)


def length_buckets(examples: Sequence[Example], batch_size: int, rng: np.random.Generator | None = None):
    """Batches of similar target length; batch order shuffled when rng is given."""
    order = sorted(range(len(examples)), key=lambda i: (len(examples[i].target), i))
    if rng is not None:
        # shuffle within equal lengths before chunking so batches vary across epochs
        keys = rng.random(len(examples))
        order = sorted(range(len(examples)), key=lambda i: (len(examples[i].target), keys[i]))
    chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    if rng is not None:
        chunks = [chunks[i] for i in rng.permutation(len(chunks))]
    return [[examples[i] for i in chunk] for chunk in chunks]
