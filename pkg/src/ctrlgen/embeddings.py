"""Ways of turning an integer control value into a vector for the decoder input.

``learnable``      one trainable row per control value
``sinusoidal``     fixed sin/cos projection, base 10000, interleaved
``scalar``         the raw value as a width-1 input
``scalar_repeat``  the raw value copied ``dim`` times
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T

STRATEGIES = ("learnable", "sinusoidal", "scalar", "scalar_repeat")


class ControlRangeError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingStrategy:
    kind: str
    dim: int = 1
    value_range: tuple[int, int] = (0, 100)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown embedding strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind == "scalar":
            object.__setattr__(self, "dim", 1)
        if self.dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {self.dim}")
        if self.kind == "sinusoidal" and self.dim % 2:
            raise ValueError(f"sinusoidal embedding needs an even dim, got {self.dim}")
        lo, hi = self.value_range
        if lo > hi:
            raise ValueError(f"empty value range {self.value_range}")
        object.__setattr__(self, "value_range", (int(lo), int(hi)))

    @property
    def width(self) -> int:
        return self.dim

    def check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        lo, hi = self.value_range
        bad = (values < lo) | (values > hi)
        if bad.any():
            c = int(values[bad].reshape(-1)[0])
            raise ControlRangeError(f"control value {c} outside the declared range [{lo}, {hi}]")
        return values


# --------------------------------------------------------------------------
# single-value forms


def embed_sinusoidal(c: int, d: int) -> np.ndarray:
    if d < 2 or d % 2:
        raise ValueError(f"sinusoidal embedding needs an even d >= 2, got {d}")
    return sinusoidal_table(np.asarray([c]), d)[0]


def sinusoidal_table(values, d: int) -> np.ndarray:
    """Rows out[2i] = sin(c / 10000^(2i/d)), out[2i+1] = cos(same)."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    freq = 10000.0 ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    ang = values[:, None] * freq[None, :]
    out = np.empty((values.size, d), dtype=np.float64)
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


def embed_scalar(c: int) -> np.ndarray:
    return np.asarray([float(c)])


def embed_scalar_repeat(c: int, d: int) -> np.ndarray:
    if d < 1:
        raise ValueError(f"scalar_repeat needs d >= 1, got {d}")
    return np.full(d, float(c))


class LearnableTable:
    """Trainable matrix with one row per value in [c_min, c_max]."""

    def __init__(self, value_range: tuple[int, int], dim: int, rng: np.random.Generator):
        lo, hi = value_range
        self.offset = int(lo)
        self.value_range = (int(lo), int(hi))
        self.rows = T.parameter(rng.uniform(-0.1, 0.1, size=(hi - lo + 1, dim)))

    def lookup(self, values) -> T.Tensor:
        values = np.asarray(values, dtype=np.int64)
        lo, hi = self.value_range
        bad = (values < lo) | (values > hi)
        if bad.any():
            c = int(values[bad].reshape(-1)[0])
            raise ControlRangeError(f"control value {c} outside the learnable table range [{lo}, {hi}]")
        return T.embedding(self.rows, values - self.offset)


def embed_learnable(c: int, table: LearnableTable) -> T.Tensor:
    return T.reshape(table.lookup(np.asarray([c])), (table.rows.shape[1],))


# --------------------------------------------------------------------------
# batched embedders used by the models


class Embedder:
    """Maps an integer array of shape [N] to a Tensor [N, width]."""

    def __init__(self, strategy: EmbeddingStrategy, rng: np.random.Generator | None = None):
        self.strategy = strategy
        self.table = None
        if strategy.kind == "learnable":
            self.table = LearnableTable(strategy.value_range, strategy.dim, rng or np.random.default_rng(0))

    @property
    def width(self) -> int:
        return self.strategy.width

    def params(self) -> dict[str, T.Tensor]:
        return {} if self.table is None else {"table": self.table.rows}

    def __call__(self, values) -> T.Tensor:
        values = np.asarray(values, dtype=np.int64).reshape(-1)
        s = self.strategy
        if s.kind == "learnable":
            return self.table.lookup(values)
        dtype = T.get_default_dtype()
        if s.kind == "sinusoidal":
            out = sinusoidal_table(values, s.dim)
        else:
            out = np.repeat(values.astype(np.float64)[:, None] * s.scale, s.dim, axis=1)
        return T.Tensor(out.astype(dtype))
