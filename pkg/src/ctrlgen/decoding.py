"""Controlled generation with live tracker updates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .controls import gold_control, make_tracker
from .data import Vocabulary


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "greedy"
    temperature: float = 1.0
    max_len: int = 50
    seed: int = 0
    batch_size: int = 256

    def __post_init__(self):
        if self.mode not in ("greedy", "temperature"):
            raise ValueError(f"unknown decode mode {self.mode!r}")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be finite and positive, got {self.temperature}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")


@dataclass
class Generation:
    desired: int
    tokens: list[str] = field(default_factory=list)
    realized: int | None = None
    truncated: bool = False
    error: str | None = None
    trackers: list[int] = field(default_factory=list)  # value fed at each step

    @property
    def ok(self) -> bool:
        return self.error is None and self.realized is not None


def sample_tokens(logits: np.ndarray, mode: str, temperature: float, uniforms: np.ndarray | None) -> np.ndarray:
    """Pick one id per row: argmax, or inverse-CDF draw from softmax(logits / temperature)."""
    if mode == "greedy":
        return np.argmax(logits, axis=-1)
    z = logits.astype(np.float64) / temperature
    z -= z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    cdf = np.cumsum(p, axis=-1)
    idx = (cdf < uniforms[:, None] * cdf[:, -1:]).sum(axis=-1)
    return np.minimum(idx, logits.shape[-1] - 1)


def _run_chunk(model, vocab: Vocabulary, kind: str, desired: Sequence[int], sources, cfg: DecodeConfig,
               indices: Sequence[int]) -> list[Generation]:
    b = len(desired)
    spec = model.config.control
    use_tracker = spec.has_tracker
    src_ids = src_mask = None
    if sources is not None:
        width = max(len(s) for s in sources)
        src_ids = np.full((b, width), vocab.pad_id, dtype=np.int64)
        src_mask = np.zeros((b, width), dtype=bool)
        for i, s in enumerate(sources):
            src_ids[i, : len(s)] = vocab.encode(s)
            src_mask[i, : len(s)] = True
    state = model.start(b, src_ids, src_mask)
    rngs = [np.random.default_rng([cfg.seed, int(j)]) for j in indices] if cfg.mode == "temperature" else None
    trackers = [make_tracker(kind, None if sources is None else sources[i]) for i in range(b)] if use_tracker else None
    out = [Generation(desired=int(c)) for c in desired]
    tokens = np.full(b, vocab.bos_id, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    desired_arr = np.asarray(desired, dtype=np.int64)
    banned = [vocab.pad_id, vocab.bos_id]
    for _ in range(cfg.max_len + 1):
        trk_vals = np.array([t.value for t in trackers], dtype=np.int64) if use_tracker else np.zeros(b, dtype=np.int64)
        for i in np.flatnonzero(~done):
            out[i].trackers.append(int(trk_vals[i]))
        logits, state = model.step(state, tokens, desired_arr, trk_vals)
        logits = np.array(logits, dtype=np.float64)
        logits[:, banned] = -np.inf
        u = np.array([r.random() for r in rngs]) if rngs is not None else None
        nxt = sample_tokens(logits, cfg.mode, cfg.temperature, u)
        for i in np.flatnonzero(~done):
            tok_id = int(nxt[i])
            if tok_id == vocab.eos_id:
                done[i] = True
                continue
            if len(out[i].tokens) >= cfg.max_len:
                # forced EOS; the output is truncated
                out[i].truncated = True
                done[i] = True
                continue
            word = vocab.itos[tok_id]
            out[i].tokens.append(word)
            if use_tracker:
                trackers[i].step(word)
        if done.all():
            break
        tokens = nxt
    for g in out:
        g.trackers = g.trackers[: len(g.tokens) + 1]
    return out


def batch_generate(model, vocab: Vocabulary, desired_values: Sequence[int], sources=None,
                   cfg: DecodeConfig = DecodeConfig(), clf=None) -> list[Generation]:
    """Generate one output per desired value and compute its realized control value.

    Failures are recorded on the element (``error``) instead of raised.
    """
    kind = model.config.control.kind
    n = len(desired_values)
    if sources is not None and len(sources) != n:
        raise ValueError("sources and desired_values differ in length")
    if model.config.has_encoder and sources is None:
        raise ValueError("model has an encoder; sources are required")
    results: list[Generation | None] = [None] * n
    valid = []
    for i, c in enumerate(desired_values):
        try:
            model.check_desired([c])
            if sources is not None and not sources[i]:
                raise ValueError("empty source sequence")
            valid.append(i)
        except ValueError as exc:
            results[i] = Generation(desired=int(c), error=str(exc))
    for lo in range(0, len(valid), cfg.batch_size):
        idx = valid[lo : lo + cfg.batch_size]
        chunk = _run_chunk(
            model, vocab, kind, [desired_values[i] for i in idx],
            None if sources is None else [sources[i] for i in idx], cfg, idx,
        )
        for i, g in zip(idx, chunk):
            try:
                src = None if sources is None else sources[i]
                g.realized = gold_control(kind, g.tokens, src, clf)
            except ValueError as exc:
                g.error = str(exc)
            results[i] = g
    return results


def generate(model, vocab: Vocabulary, desired_c: int, source=None, cfg: DecodeConfig = DecodeConfig(),
             index: int = 0) -> list[str]:
    """Single controlled generation; raises on out-of-range desired values."""
    model.check_desired([desired_c])
    if model.config.has_encoder and not source:
        raise ValueError("model has an encoder; a nonempty source is required")
    if not model.config.has_encoder and source is not None:
        raise ValueError("model has no encoder; source must be omitted")
    g = _run_chunk(model, vocab, model.config.control.kind, [desired_c],
                   None if source is None else [source], cfg, [index])[0]
    return g.tokens
