"""LSTM and Transformer decoders whose per-step input is
[token embedding | desired-control embedding | current-control embedding].
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import tensor as T
from .batching import Batch
from .controls import KIND_RANGES
from .embeddings import STRATEGIES, Embedder, EmbeddingStrategy, sinusoidal_table

FAMILIES = ("lstm", "transformer")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ControlSpec:
    """What is controlled and how its values are embedded.

    ``strategy`` is one of the embedding strategies or ``none`` for the
    uncontrolled baseline.  The tracker (current-value) embedding uses the same
    strategy family with its own parameters.
    """

    kind: str = "length"
    strategy: str = "scalar"
    dim: int = 1
    value_range: tuple[int, int] = (0, 30)
    tracker: bool = True
    tracker_range: tuple[int, int] = (0, 45)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("length", "edit", "sentiment"):
            raise ConfigError(f"unknown control kind {self.kind!r}")
        if self.strategy not in STRATEGIES + ("none",):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "scalar":
            object.__setattr__(self, "dim", 1)
        object.__setattr__(self, "value_range", tuple(int(v) for v in self.value_range))
        object.__setattr__(self, "tracker_range", tuple(int(v) for v in self.tracker_range))
        if self.kind in KIND_RANGES:
            # trackers for edit always live in 0..10
            if self.kind == "edit":
                object.__setattr__(self, "tracker_range", KIND_RANGES["edit"])
        try:
            self.desired_strategy()
            self.tracker_strategy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def controlled(self) -> bool:
        return self.strategy != "none"

    @property
    def has_tracker(self) -> bool:
        return self.controlled and self.tracker and self.kind != "sentiment"

    def desired_strategy(self) -> EmbeddingStrategy | None:
        if not self.controlled:
            return None
        return EmbeddingStrategy(self.strategy, self.dim, self.value_range, self.scale)

    def tracker_strategy(self) -> EmbeddingStrategy | None:
        if not self.has_tracker:
            return None
        return EmbeddingStrategy(self.strategy, self.dim, self.tracker_range, self.scale)

    @property
    def desired_width(self) -> int:
        return self.dim if self.controlled else 0

    @property
    def tracker_width(self) -> int:
        return self.dim if self.has_tracker else 0


@dataclass(frozen=True)
class ModelConfig:
    family: str = "lstm"
    vocab_size: int = 8
    token_dim: int = 64
    hidden_dim: int = 128
    n_layers: int = 1
    n_heads: int = 4
    control: ControlSpec = field(default_factory=ControlSpec)
    has_encoder: bool = False
    max_seq_len: int = 64

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}")
        for name in ("vocab_size", "token_dim", "hidden_dim", "n_layers", "n_heads", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.family == "transformer":
            if self.token_dim % 2:
                raise ConfigError(f"token_dim must be even for positional encoding, got {self.token_dim}")
            width = self.input_width
            if width % self.n_heads:
                raise ConfigError(
                    f"decoder input size {width} (token {self.token_dim} + desired {self.control.desired_width}"
                    f" + tracker {self.control.tracker_width}) is not divisible by n_heads={self.n_heads}"
                )
            if self.has_encoder and self.token_dim % self.n_heads:
                raise ConfigError(
                    f"encoder input size {self.token_dim} is not divisible by n_heads={self.n_heads}"
                )

    @property
    def input_width(self) -> int:
        return self.token_dim + self.control.desired_width + self.control.tracker_width

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelConfig":
        d = dict(d)
        d["control"] = ControlSpec(**d["control"])
        return cls(**d)


def build_step_input(token_emb: T.Tensor, desired_emb: T.Tensor | None, tracker_emb: T.Tensor | None,
                     config: ModelConfig | None = None) -> T.Tensor:
    """[token | desired | tracker] along the last axis, absent parts skipped."""
    parts = [p for p in (token_emb, desired_emb, tracker_emb) if p is not None]
    out = T.concat(parts, axis=-1) if len(parts) > 1 else parts[0]
    if config is not None:
        widths = (config.token_dim, config.control.desired_width, config.control.tracker_width)
        got = tuple(0 if p is None else p.shape[-1] for p in (token_emb, desired_emb, tracker_emb))
        if got != widths:
            raise T.ShapeError(f"build_step_input: expected widths {widths}, got {got}")
    return out


class _Params:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.store: dict[str, T.Tensor] = {}

    def uniform(self, name: str, shape, bound: float) -> T.Tensor:
        p = T.parameter(self.rng.uniform(-bound, bound, size=shape))
        self.store[name] = p
        return p

    def weight(self, name: str, fan_in: int, shape) -> T.Tensor:
        return self.uniform(name, shape, 1.0 / np.sqrt(fan_in))

    def const(self, name: str, value: float, shape) -> T.Tensor:
        p = T.parameter(np.full(shape, value))
        self.store[name] = p
        return p


class Seq2SeqModel:
    """Shared plumbing: parameters, control embedders, checkpoint state."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._p = _Params(rng)
        self.tok_emb = self._p.uniform("tok_emb", (config.vocab_size, config.token_dim), 0.1)
        spec = config.control
        self.desired = Embedder(spec.desired_strategy(), rng) if spec.controlled else None
        self.tracker = Embedder(spec.tracker_strategy(), rng) if spec.has_tracker else None
        for prefix, emb in (("desired", self.desired), ("tracker", self.tracker)):
            if emb is not None:
                for k, v in emb.params().items():
                    self._p.store[f"{prefix}.{k}"] = v
        self._build(rng)

    def _build(self, rng):
        raise NotImplementedError

    @property
    def params(self) -> dict[str, T.Tensor]:
        return self._p.store

    def parameters(self) -> list[T.Tensor]:
        return list(self._p.store.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._p.store.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self._p.store):
            missing = set(self._p.store) ^ set(state)
            raise ValueError(f"state dict keys do not match model parameters: {sorted(missing)}")
        for k, v in state.items():
            p = self._p.store[k]
            if p.shape != v.shape:
                raise ValueError(f"parameter {k}: expected shape {p.shape}, got {v.shape}")
            p.data = np.asarray(v, dtype=p.data.dtype).copy()

    def astype(self, dtype) -> "Seq2SeqModel":
        for p in self._p.store.values():
            p.data = p.data.astype(dtype)
        return self

    @property
    def dtype(self):
        return self.tok_emb.data.dtype

    def control_embeddings(self, desired, trackers) -> tuple[T.Tensor | None, T.Tensor | None]:
        """desired [B] -> [B, dd]; trackers [B, ...] -> [B, ..., dk]."""
        d = self.desired(desired) if self.desired is not None else None
        k = None
        if self.tracker is not None:
            trackers = np.asarray(trackers)
            k = self.tracker(trackers.reshape(-1))
            k = T.reshape(k, trackers.shape + (k.shape[-1],))
        if d is not None and d.dtype != self.dtype:
            d = T.Tensor(d.data.astype(self.dtype)) if not d.requires_grad else d
        if k is not None and k.dtype != self.dtype and not k.requires_grad:
            k = T.Tensor(k.data.astype(self.dtype))
        return d, k

    def check_desired(self, values) -> None:
        if self.desired is not None:
            self.desired.strategy.check(values)

    # subclasses: forward(batch) -> logits [B*T, V]; start(); step()


# --------------------------------------------------------------------------
# LSTM


class LSTMModel(Seq2SeqModel):
    def _build(self, rng):
        cfg = self.config
        h = cfg.hidden_dim
        self.layers = []
        in_dim = cfg.input_width
        for layer in range(cfg.n_layers):
            fan = in_dim + h
            self.layers.append((
                self._p.weight(f"lstm{layer}.w_x", fan, (in_dim, 4 * h)),
                self._p.weight(f"lstm{layer}.w_h", fan, (h, 4 * h)),
                self._p.weight(f"lstm{layer}.b", fan, (4 * h,)),
            ))
            in_dim = h
        self.out_w = self._p.weight("out.w", h, (h, cfg.vocab_size))
        self.out_b = self._p.weight("out.b", h, (cfg.vocab_size,))
        if cfg.has_encoder:
            d = cfg.token_dim
            self.enc = {}
            for direction in ("fwd", "bwd"):
                self.enc[direction] = (
                    self._p.weight(f"enc.{direction}.w_x", d + h, (d, 4 * h)),
                    self._p.weight(f"enc.{direction}.w_h", d + h, (h, 4 * h)),
                    self._p.weight(f"enc.{direction}.b", d + h, (4 * h,)),
                )
            self.bridge_h = (self._p.weight("bridge.h.w", 2 * h, (2 * h, h)), self._p.weight("bridge.h.b", 2 * h, (h,)))
            self.bridge_c = (self._p.weight("bridge.c.w", 2 * h, (2 * h, h)), self._p.weight("bridge.c.b", 2 * h, (h,)))

    @staticmethod
    def _cell(x: T.Tensor, h: T.Tensor, c: T.Tensor, weights) -> tuple[T.Tensor, T.Tensor]:
        w_x, w_h, b = weights
        hd = h.shape[-1]
        z = T.add(T.linear(x, w_x, b), T.matmul(h, w_h))
        i = T.sigmoid(z[:, :hd])
        f = T.sigmoid(z[:, hd : 2 * hd])
        g = T.tanh(z[:, 2 * hd : 3 * hd])
        o = T.sigmoid(z[:, 3 * hd :])
        c2 = T.add(T.mul(f, c), T.mul(i, g))
        h2 = T.mul(o, T.tanh(c2))
        return h2, c2

    def _zeros(self, b: int) -> T.Tensor:
        return T.Tensor(np.zeros((b, self.config.hidden_dim), dtype=self.dtype))

    def encode(self, source, source_mask=None) -> tuple[T.Tensor, list]:
        """Bidirectional encoder: per-token states [B, S, 2H] and the decoder's initial state."""
        if not self.config.has_encoder:
            raise ConfigError("model has no encoder")
        source = np.asarray(source, dtype=np.int64)
        if source.ndim != 2 or source.shape[1] == 0:
            raise ValueError("encoder input must be a nonempty [B, S] id array")
        b, s = source.shape
        mask = np.ones((b, s), dtype=bool) if source_mask is None else np.asarray(source_mask, dtype=bool)
        hd = self.config.hidden_dim
        emb = [T.embedding(self.tok_emb, source[:, t]) for t in range(s)]
        outs = {}
        finals = {}
        for direction, steps in (("fwd", range(s)), ("bwd", range(s - 1, -1, -1))):
            h, c = self._zeros(b), self._zeros(b)
            seq = [None] * s
            for t in steps:
                h2, c2 = self._cell(emb[t], h, c, self.enc[direction])
                m = np.repeat(mask[:, t : t + 1], hd, axis=1).astype(self.dtype)
                if m.all():
                    h, c = h2, c2
                else:
                    # padded positions keep the previous state
                    h = T.add(T.apply_mask(h2, m), T.apply_mask(h, 1.0 - m))
                    c = T.add(T.apply_mask(c2, m), T.apply_mask(c, 1.0 - m))
                seq[t] = h
            outs[direction] = seq
            finals[direction] = (h, c)
        enc_out = T.stack([T.concat([outs["fwd"][t], outs["bwd"][t]]) for t in range(s)], axis=1)
        hcat = T.concat([finals["fwd"][0], finals["bwd"][0]])
        ccat = T.concat([finals["fwd"][1], finals["bwd"][1]])
        h0 = T.tanh(T.linear(hcat, *self.bridge_h))
        c0 = T.linear(ccat, *self.bridge_c)
        return enc_out, [(h0, c0) for _ in self.layers]

    def start(self, batch_size: int, source=None, source_mask=None) -> list:
        if self.config.has_encoder:
            if source is None:
                raise ValueError("this model needs a source sequence")
            return self.encode(source, source_mask)[1]
        return [(self._zeros(batch_size), self._zeros(batch_size)) for _ in self.layers]

    def _step_tensor(self, state: list, x: T.Tensor) -> tuple[T.Tensor, list]:
        new_state = []
        for weights, (h, c) in zip(self.layers, state):
            h, c = self._cell(x, h, c, weights)
            new_state.append((h, c))
            x = h
        return x, new_state

    def forward(self, batch: Batch) -> T.Tensor:
        b, t = batch.inputs.shape
        desired, trackers = self.control_embeddings(batch.desired, batch.trackers)
        state = self.start(b, batch.source, batch.source_mask)
        hs = []
        for step in range(t):
            tok = T.embedding(self.tok_emb, batch.inputs[:, step])
            trk = None if trackers is None else trackers[:, step, :]
            x = build_step_input(tok, desired, trk)
            top, state = self._step_tensor(state, x)
            hs.append(top)
        hid = T.stack(hs, axis=1)
        logits = T.linear(hid, self.out_w, self.out_b)
        return T.reshape(logits, (b * t, self.config.vocab_size))

    def decode_step(self, state: list, step_input: T.Tensor) -> tuple[T.Tensor, list]:
        top, state = self._step_tensor(state, step_input)
        return T.linear(top, self.out_w, self.out_b), state

    def step(self, state: list, tokens, desired, trackers) -> tuple[np.ndarray, list]:
        with T.no_grad():
            d, k = self.control_embeddings(np.asarray(desired), np.asarray(trackers))
            tok = T.embedding(self.tok_emb, np.asarray(tokens, dtype=np.int64))
            logits, state = self.decode_step(state, build_step_input(tok, d, k))
        return logits.data, state


lstm_decode_step = LSTMModel.decode_step


# --------------------------------------------------------------------------
# Transformer


def _heads(x: T.Tensor, n_heads: int) -> T.Tensor:
    b, t, d = x.shape
    return T.transpose(T.reshape(x, (b, t, n_heads, d // n_heads)), (0, 2, 1, 3))


def _merge(x: T.Tensor) -> T.Tensor:
    b, h, t, dh = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, t, h * dh))


class TransformerModel(Seq2SeqModel):
    def _build(self, rng):
        cfg = self.config
        d = cfg.input_width
        f = cfg.hidden_dim
        self.pos = sinusoidal_table(np.arange(cfg.max_seq_len), cfg.token_dim)
        p = self._p
        self.blocks = []
        for i in range(cfg.n_layers):
            blk = {
                "ln1": (p.const(f"dec{i}.ln1.g", 1.0, (d,)), p.const(f"dec{i}.ln1.b", 0.0, (d,))),
                "qkv": (p.weight(f"dec{i}.qkv.w", d, (d, 3 * d)), p.weight(f"dec{i}.qkv.b", d, (3 * d,))),
                "proj": (p.weight(f"dec{i}.proj.w", d, (d, d)), p.weight(f"dec{i}.proj.b", d, (d,))),
                "ln2": (p.const(f"dec{i}.ln2.g", 1.0, (d,)), p.const(f"dec{i}.ln2.b", 0.0, (d,))),
                "ff1": (p.weight(f"dec{i}.ff1.w", d, (d, f)), p.weight(f"dec{i}.ff1.b", d, (f,))),
                "ff2": (p.weight(f"dec{i}.ff2.w", f, (f, d)), p.weight(f"dec{i}.ff2.b", f, (d,))),
            }
            if cfg.has_encoder:
                e = cfg.token_dim
                blk["lnx"] = (p.const(f"dec{i}.lnx.g", 1.0, (d,)), p.const(f"dec{i}.lnx.b", 0.0, (d,)))
                blk["xq"] = (p.weight(f"dec{i}.xq.w", d, (d, d)), p.weight(f"dec{i}.xq.b", d, (d,)))
                blk["xkv"] = (p.weight(f"dec{i}.xkv.w", e, (e, 2 * d)), p.weight(f"dec{i}.xkv.b", e, (2 * d,)))
                blk["xproj"] = (p.weight(f"dec{i}.xproj.w", d, (d, d)), p.weight(f"dec{i}.xproj.b", d, (d,)))
            self.blocks.append(blk)
        self.ln_f = (p.const("ln_f.g", 1.0, (d,)), p.const("ln_f.b", 0.0, (d,)))
        self.out_w = p.weight("out.w", d, (d, cfg.vocab_size))
        self.out_b = p.weight("out.b", d, (cfg.vocab_size,))
        if cfg.has_encoder:
            e = cfg.token_dim
            self.enc_blocks = []
            for i in range(cfg.n_layers):
                self.enc_blocks.append({
                    "ln1": (p.const(f"enc{i}.ln1.g", 1.0, (e,)), p.const(f"enc{i}.ln1.b", 0.0, (e,))),
                    "qkv": (p.weight(f"enc{i}.qkv.w", e, (e, 3 * e)), p.weight(f"enc{i}.qkv.b", e, (3 * e,))),
                    "proj": (p.weight(f"enc{i}.proj.w", e, (e, e)), p.weight(f"enc{i}.proj.b", e, (e,))),
                    "ln2": (p.const(f"enc{i}.ln2.g", 1.0, (e,)), p.const(f"enc{i}.ln2.b", 0.0, (e,))),
                    "ff1": (p.weight(f"enc{i}.ff1.w", e, (e, f)), p.weight(f"enc{i}.ff1.b", e, (f,))),
                    "ff2": (p.weight(f"enc{i}.ff2.w", f, (f, e)), p.weight(f"enc{i}.ff2.b", f, (e,))),
                })
            self.ln_e = (p.const("ln_e.g", 1.0, (e,)), p.const("ln_e.b", 0.0, (e,)))

    def _embed_tokens(self, ids: np.ndarray, offset: int = 0) -> T.Tensor:
        b, t = ids.shape
        if offset + t > self.config.max_seq_len:
            raise ValueError(f"sequence length {offset + t} exceeds max_seq_len={self.config.max_seq_len}")
        pos = np.broadcast_to(self.pos[offset : offset + t], (b, t, self.config.token_dim)).astype(self.dtype)
        return T.add(T.embedding(self.tok_emb, ids), T.Tensor(pos))

    def _ffn(self, x: T.Tensor, blk) -> T.Tensor:
        h = T.layer_norm(x, *blk["ln2"])
        return T.add(x, T.linear(T.relu(T.linear(h, *blk["ff1"])), *blk["ff2"]))

    def encode(self, source, source_mask=None) -> tuple[T.Tensor, np.ndarray]:
        if not self.config.has_encoder:
            raise ConfigError("model has no encoder")
        source = np.asarray(source, dtype=np.int64)
        if source.ndim != 2 or source.shape[1] == 0:
            raise ValueError("encoder input must be a nonempty [B, S] id array")
        mask = np.ones(source.shape, dtype=bool) if source_mask is None else np.asarray(source_mask, dtype=bool)
        nh = self.config.n_heads
        x = self._embed_tokens(source)
        for blk in self.enc_blocks:
            h = T.layer_norm(x, *blk["ln1"])
            e = h.shape[-1]
            qkv = T.linear(h, *blk["qkv"])
            q, k, v = (_heads(qkv[..., i * e : (i + 1) * e], nh) for i in range(3))
            a = _merge(T.attention(q, k, v, causal=False, key_mask=mask))
            x = T.add(x, T.linear(a, *blk["proj"]))
            x = self._ffn(x, blk)
        return T.layer_norm(x, *self.ln_e), mask

    def _decoder_input(self, ids: np.ndarray, desired, trackers, offset: int = 0) -> T.Tensor:
        b, t = ids.shape
        tok = self._embed_tokens(ids, offset)
        d, k = self.control_embeddings(desired, trackers)
        if d is not None:
            d = T.tile(T.reshape(d, (b, 1, d.shape[-1])), (1, t, 1))
        return build_step_input(tok, d, k)

    def _cross(self, x, blk, memory):
        enc_out, enc_mask = memory
        d = x.shape[-1]
        nh = self.config.n_heads
        h = T.layer_norm(x, *blk["lnx"])
        q = _heads(T.linear(h, *blk["xq"]), nh)
        kv = T.linear(enc_out, *blk["xkv"])
        k, v = _heads(kv[..., :d], nh), _heads(kv[..., d:], nh)
        a = _merge(T.attention(q, k, v, causal=False, key_mask=enc_mask))
        return T.add(x, T.linear(a, *blk["xproj"]))

    def forward_tokens(self, ids, desired, trackers, memory=None) -> T.Tensor:
        """Full-sequence logits [B, T, V] under causal masking."""
        ids = np.asarray(ids, dtype=np.int64)
        x = self._decoder_input(ids, desired, trackers)
        d = x.shape[-1]
        nh = self.config.n_heads
        for blk in self.blocks:
            h = T.layer_norm(x, *blk["ln1"])
            qkv = T.linear(h, *blk["qkv"])
            q, k, v = (_heads(qkv[..., i * d : (i + 1) * d], nh) for i in range(3))
            x = T.add(x, T.linear(_merge(T.attention(q, k, v, causal=True)), *blk["proj"]))
            if memory is not None:
                x = self._cross(x, blk, memory)
            x = self._ffn(x, blk)
        return T.linear(T.layer_norm(x, *self.ln_f), self.out_w, self.out_b)

    def forward(self, batch: Batch) -> T.Tensor:
        b, t = batch.inputs.shape
        memory = self.encode(batch.source, batch.source_mask) if self.config.has_encoder else None
        trackers = batch.trackers if self.tracker is not None else None
        logits = self.forward_tokens(batch.inputs, batch.desired, trackers, memory)
        return T.reshape(logits, (b * t, self.config.vocab_size))

    def start(self, batch_size: int, source=None, source_mask=None) -> dict:
        state = {"pos": 0, "k": [None] * len(self.blocks), "v": [None] * len(self.blocks), "memory": None}
        if self.config.has_encoder:
            if source is None:
                raise ValueError("this model needs a source sequence")
            with T.no_grad():
                state["memory"] = self.encode(source, source_mask)
        return state

    def step(self, state: dict, tokens, desired, trackers) -> tuple[np.ndarray, dict]:
        """One incremental position using cached keys/values."""
        nh = self.config.n_heads
        with T.no_grad():
            ids = np.asarray(tokens, dtype=np.int64)[:, None]
            trk = None if self.tracker is None else np.asarray(trackers)[:, None]
            x = self._decoder_input(ids, np.asarray(desired), trk, offset=state["pos"])
            d = x.shape[-1]
            ks, vs = list(state["k"]), list(state["v"])
            for i, blk in enumerate(self.blocks):
                h = T.layer_norm(x, *blk["ln1"])
                qkv = T.linear(h, *blk["qkv"])
                q, k, v = (_heads(qkv[..., j * d : (j + 1) * d], nh) for j in range(3))
                ks[i] = k.data if ks[i] is None else np.concatenate([ks[i], k.data], axis=2)
                vs[i] = v.data if vs[i] is None else np.concatenate([vs[i], v.data], axis=2)
                a = T.attention(q, T.Tensor(ks[i]), T.Tensor(vs[i]), causal=True)
                x = T.add(x, T.linear(_merge(a), *blk["proj"]))
                if state["memory"] is not None:
                    x = self._cross(x, blk, state["memory"])
                x = self._ffn(x, blk)
            logits = T.linear(T.layer_norm(x, *self.ln_f), self.out_w, self.out_b)
        new_state = {"pos": state["pos"] + 1, "k": ks, "v": vs, "memory": state["memory"]}
        return logits.data[:, 0, :], new_state


def transformer_decode_forward(model: TransformerModel, tokens, desired_c: int, tracker_values=None,
                               encoder_out=None) -> T.Tensor:
    """Logits [T, V] for a single sequence."""
    ids = np.asarray(tokens, dtype=np.int64)[None, :]
    trk = None if tracker_values is None else np.asarray(tracker_values, dtype=np.int64)[None, :]
    return T.reshape(model.forward_tokens(ids, np.asarray([desired_c]), trk, encoder_out),
                     (ids.shape[1], model.config.vocab_size))


def build_model(config: ModelConfig, seed: int = 0) -> Seq2SeqModel:
    cls = LSTMModel if config.family == "lstm" else TransformerModel
    return cls(config, seed)
