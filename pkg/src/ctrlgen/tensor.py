"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable op lives in this module as a plain function that takes
``Tensor`` operands and returns a new ``Tensor``.  When any operand requires a
gradient (and recording is enabled) the output keeps a reference to its
parents and a closure mapping the output gradient to input gradients.

There is no implicit broadcasting: elementwise ops require identical shapes.
Use :func:`tile`, :func:`reshape` or :func:`linear` (bias added per row) when a
smaller operand has to be expanded.
"""

from __future__ import annotations

import contextlib
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True
_ids = itertools.count()


class ShapeError(ValueError):
    """Operand shapes do not conform for an op."""


class GradientError(RuntimeError):
    """backward() called on something that cannot be differentiated."""


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def default_dtype(dtype):
    old = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    old = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = old


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "id", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is None and (not isinstance(data, np.ndarray) or arr.dtype.kind != "f"):
            dtype = _DEFAULT_DTYPE
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.id = next(_ids)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{rg})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # operator sugar; every path goes through the functions below
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return add_scalar(scale(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=_DEFAULT_DTYPE), requires_grad=True)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    out = Tensor(data, dtype=data.dtype if data.dtype.kind == "f" else None)
    out.op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: expected identical shapes, got {a.shape} and {b.shape}")


# --------------------------------------------------------------------------
# graph traversal


@dataclass(frozen=True)
class Node:
    op: str
    inputs: tuple[int, ...]
    output: int


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if t.id in seen:
            continue
        seen.add(t.id)
        stack.append((t, True))
        for p in t._parents:
            if p.id not in seen:
                stack.append((p, False))
    return order


def trace(root: Tensor) -> list[Node]:
    """Topologically ordered op records of the graph ending at ``root``."""
    return [Node(t.op, tuple(p.id for p in t._parents), t.id) for t in _toposort(root) if t._parents]


def backward(loss: Tensor, free_graph: bool = True) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable tensor requiring grad."""
    if loss.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GradientError("backward on a tensor that is detached from any parameter")
    order = _toposort(loss)
    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    for t in reversed(order):
        g = grads.pop(t.id, None)
        if g is None:
            continue
        if t.requires_grad:
            t.grad = g if t.grad is None else t.grad + g
        if t._backward is None:
            continue
        for p, pg in zip(t._parents, t._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            if p.id in grads:
                grads[p.id] = grads[p.id] + pg
            else:
                grads[p.id] = pg
    if free_graph:
        for t in order:
            t._parents = ()
            t._backward = None


# --------------------------------------------------------------------------
# elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, s: float) -> Tensor:
    return _result(a.data * s, (a,), lambda g: (g * s,), "scale")


def add_scalar(a: Tensor, s: float) -> Tensor:
    return _result(a.data + s, (a,), lambda g: (g,), "add_scalar")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sigmoid(a: Tensor) -> Tensor:
    # split by sign to avoid overflow in exp
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout as multiplication by a stored keep-mask."""
    if rate <= 0.0:
        return a
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return apply_mask(a, mask)


def apply_mask(a: Tensor, mask: np.ndarray) -> Tensor:
    if mask.shape != a.shape:
        raise ShapeError(f"apply_mask: expected mask shape {a.shape}, got {mask.shape}")
    return _result(a.data * mask, (a,), lambda g: (g * mask,), "mask")


# --------------------------------------------------------------------------
# shape manipulation


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}") from exc
    return _result(out, (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def tile(a: Tensor, reps: Sequence[int]) -> Tensor:
    """np.tile restricted to len(reps) == a.ndim."""
    reps = tuple(reps)
    if len(reps) != a.ndim:
        raise ShapeError(f"tile: expected {a.ndim} repetition counts, got {len(reps)}")
    shape = a.shape

    def bw(g):
        split = []
        for r, s in zip(reps, shape):
            split.extend((r, s))
        return (g.reshape(split).sum(axis=tuple(range(0, 2 * len(shape), 2))),)

    return _result(np.tile(a.data, reps), (a,), bw, "tile")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: no operands")
    nd = tensors[0].ndim
    ax = axis % nd
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != nd or any(t.shape[i] != ref[i] for i in range(nd) if i != ax):
            raise ShapeError(
                f"concat: non-concatenated dims must match along axis {axis}, got {ref} and {t.shape}"
            )
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * nd
            idx[ax] = slice(lo, hi)
            out.append(g[tuple(idx)])
        return out

    return _result(np.concatenate([t.data for t in tensors], axis=ax), tensors, bw, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != ref:
            raise ShapeError(f"stack: expected identical shapes, got {ref} and {t.shape}")
    ax = axis % (len(ref) + 1)

    def bw(g):
        return [np.take(g, i, axis=ax) for i in range(len(tensors))]

    return _result(np.stack([t.data for t in tensors], axis=ax), tensors, bw, "stack")


def _is_basic_index(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (slice, int, np.integer)) or p is Ellipsis or p is None for p in parts)


def slice_(a: Tensor, idx) -> Tensor:
    shape = a.shape
    out = a.data[idx]
    basic = _is_basic_index(idx)

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    if not isinstance(out, np.ndarray):
        out = np.asarray(out)
    return _result(out, (a,), bw, "slice")


# --------------------------------------------------------------------------
# reductions and linear algebra


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    if axis is None:
        return _result(
            np.asarray([a.data.sum()]), (a,), lambda g: (np.full(shape, g[0], dtype=a.dtype),), "sum"
        )
    ax = axis % a.ndim

    def bw(g):
        return (np.broadcast_to(np.expand_dims(g, ax), shape).copy(),)

    return _result(a.data.sum(axis=ax), (a,), bw, "sum")


def mean(a: Tensor) -> Tensor:
    return scale(sum_(a), 1.0 / a.size)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.ndim != b.ndim:
        raise ShapeError(f"matmul: expected operands of equal rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(
            f"matmul: expected {a.shape} @ (..., {a.shape[-1]}, n) with batch {a.shape[:-2]}, got {b.shape}"
        )
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g)

    return _result(ad @ bd, (a, b), bw, "matmul")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x[..., in] @ w[in, out] + b[out], with b added to every row."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: expected x[..., {w.shape[0]}] for weight {w.shape}, got {x.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"linear: expected bias shape ({w.shape[1]},), got {b.shape}")
    xd, wd = x.data, w.data
    lead = xd.shape[:-1]
    x2 = xd.reshape(-1, xd.shape[-1])
    out = x2 @ wd
    if b is not None:
        out = out + b.data
    out = out.reshape(lead + (wd.shape[1],))

    def bw(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ wd.T).reshape(xd.shape)
        gw = x2.T @ g2
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return _result(out, parents, bw, "linear")


# --------------------------------------------------------------------------
# normalisation, softmax, losses


def softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _result(p, (a,), bw, "softmax")


def _log_softmax_np(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def log_softmax(a: Tensor) -> Tensor:
    out = _log_softmax_np(a.data)
    p = np.exp(out)

    def bw(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _result(out, (a,), bw, "log_softmax")


def cross_entropy(logits: Tensor, targets, mask=None, reduction: str = "mean") -> Tensor:
    """Masked negative log-likelihood of integer targets under softmax(logits).

    logits is [N, V]; targets and mask are length-N arrays.  ``reduction`` is
    "mean" (over unmasked rows) or "sum".
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: expected logits [N, V] and targets [N], got {logits.shape} and {targets.shape}")
    n, v = logits.shape
    if n and (targets.min() < 0 or targets.max() >= v):
        raise ValueError(f"cross_entropy: target id out of range [0, {v})")
    m = np.ones(n, dtype=logits.dtype) if mask is None else np.asarray(mask, dtype=logits.dtype)
    count = m.sum()
    if count == 0:
        raise ValueError("cross_entropy: every position is masked")
    lsm = _log_softmax_np(logits.data)
    rows = np.arange(n)
    picked = lsm[rows, targets]
    total = -(picked * m).sum()
    denom = count if reduction == "mean" else 1.0

    def bw(g):
        grad = np.exp(lsm)
        grad[rows, targets] -= 1.0
        grad *= (m / denom)[:, None]
        return (grad * g[0],)

    return _result(np.asarray([total / denom]), (logits,), bw, "cross_entropy")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: expected gamma/beta shape ({d},), got {gamma.shape} and {beta.shape}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    var = xd.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    gd = gamma.data

    def bw(g):
        red = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=red)
        dbeta = g.sum(axis=red)
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        return dx, dgamma, dbeta

    return _result(xhat * gd + beta.data, (x, gamma, beta), bw, "layer_norm")


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup: table[V, D] indexed by an integer array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding: expected a [V, D] table, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding: id out of range [0, {table.shape[0]})")
    shape = table.shape

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return _result(table.data[ids], (table,), bw, "embedding")


def attention(q: Tensor, k: Tensor, v: Tensor, causal: bool = False, key_mask=None) -> Tensor:
    """Scaled dot-product attention over [B, H, T, d] operands.

    With ``causal`` set, query i (aligned to the end of the key axis) only
    attends to keys at or before its own absolute position, so a suffix of
    queries can be run against a cached key prefix.  ``key_mask`` is a
    boolean [B, Tk] array, False marking keys to ignore.
    """
    if q.ndim != 4 or k.ndim != 4 or v.ndim != 4:
        raise ShapeError(f"attention: expected rank-4 operands, got {q.shape}, {k.shape}, {v.shape}")
    b, h, tq, d = q.shape
    if k.shape[:2] != (b, h) or k.shape[3] != d or v.shape[:3] != k.shape[:3]:
        raise ShapeError(f"attention: incompatible shapes q{q.shape} k{k.shape} v{v.shape}")
    tk = k.shape[2]
    qd, kd, vd = q.data, k.data, v.data
    sc = 1.0 / np.sqrt(d)
    scores = (qd @ np.swapaxes(kd, -1, -2)) * sc
    blocked = np.zeros((b, 1, tq, tk), dtype=bool)
    if causal:
        pos_q = np.arange(tq) + (tk - tq)
        blocked |= (np.arange(tk)[None, :] > pos_q[:, None])[None, None]
    if key_mask is not None:
        km = np.asarray(key_mask, dtype=bool)
        if km.shape != (b, tk):
            raise ShapeError(f"attention: expected key_mask shape {(b, tk)}, got {km.shape}")
        blocked |= ~km[:, None, None, :]
    scores = np.where(blocked, -1e30, scores)
    scores -= scores.max(axis=-1, keepdims=True)
    p = np.exp(scores)
    p /= p.sum(axis=-1, keepdims=True)
    out = p @ vd

    def bw(g):
        gv = np.swapaxes(p, -1, -2) @ g
        gp = g @ np.swapaxes(vd, -1, -2)
        gs = p * (gp - (gp * p).sum(axis=-1, keepdims=True)) * sc
        gq = gs @ kd
        gk = np.swapaxes(gs, -1, -2) @ qd
        return gq, gk, gv

    return _result(out, (q, k, v), bw, "attention")


# --------------------------------------------------------------------------
# numerical gradient check


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients of f at x.

    The denominator is max(|analytic|, |numeric|, floor) so coordinates with
    a vanishing true derivative are judged by absolute error.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    with default_dtype(np.float64):
        xt = Tensor(x0.copy(), requires_grad=True)
        y = f(xt)
        if y.size != 1:
            raise GradientError(f"grad_check needs a scalar function, got shape {y.shape}")
        if not np.all(np.isfinite(y.data)):
            raise FloatingPointError("grad_check: f(x) is not finite")
        if y.requires_grad:
            backward(y)
            analytic = xt.grad if xt.grad is not None else np.zeros_like(x0)
        else:
            analytic = np.zeros_like(x0)
        numeric = np.zeros_like(x0)
        flat = x0.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(Tensor(x0.copy())).item()
            flat[i] = orig - eps
            fm = f(Tensor(x0.copy())).item()
            flat[i] = orig
            numeric.reshape(-1)[i] = (fp - fm) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def parameters_checksum(params: Iterable[Tensor]) -> str:
    import hashlib

    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()
