"""Random (f, x) pairs for gradient checking, one entry per differentiable op.

Each f maps a Tensor to a scalar by weighting the op output with fixed
random coefficients, so every output coordinate contributes.
"""

import numpy as np

from ctrlgen import tensor as T
from ctrlgen.tensor import Tensor


def _weighted(out: Tensor, r: np.ndarray) -> Tensor:
    return T.sum_(T.mul(out, Tensor(r)))


def _unary(op, shape=(3, 4), low=-2.0, high=2.0):
    def case(rng):
        x = rng.uniform(low, high, size=shape)
        r = rng.normal(size=op(Tensor(x)).shape)
        return (lambda t: _weighted(op(t), r)), x

    return case


def _relu(rng):
    x = rng.uniform(-2, 2, size=(3, 4))
    x = np.where(np.abs(x) < 1e-2, 0.5, x)
    r = rng.normal(size=x.shape)
    return (lambda t: _weighted(T.relu(t), r)), x


def _binary(op, which):
    def case(rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        r = rng.normal(size=(3, 4))
        if which == 0:
            return (lambda t: _weighted(op(t, Tensor(b)), r)), a
        return (lambda t: _weighted(op(Tensor(a), t), r)), b

    return case


def _matmul(which):
    def case(rng):
        a, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 4, 5))
        r = rng.normal(size=(2, 3, 5))
        if which == 0:
            return (lambda t: _weighted(T.matmul(t, Tensor(b)), r)), a
        return (lambda t: _weighted(T.matmul(Tensor(a), t), r)), b

    return case


def _linear(which):
    def case(rng):
        x, w, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
        r = rng.normal(size=(2, 3, 5))
        args = [Tensor(x), Tensor(w), Tensor(b)]
        src = [x, w, b][which]

        def f(t):
            a = list(args)
            a[which] = t
            return _weighted(T.linear(*a), r)

        return f, src

    return case


def _concat(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 2))
    r = rng.normal(size=(2, 5))
    return (lambda t: _weighted(T.concat([t, Tensor(b)]), r)), a


def _stack(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(2, 3))
    r = rng.normal(size=(2, 2, 3))
    return (lambda t: _weighted(T.stack([t, Tensor(b)], axis=1), r)), a


def _slice_basic(rng):
    x = rng.normal(size=(4, 5))
    r = rng.normal(size=(2, 3))
    return (lambda t: _weighted(t[1:3, 2:], r)), x


def _slice_fancy(rng):
    x = rng.normal(size=(4, 5))
    idx = np.array([0, 2, 2, 3])
    r = rng.normal(size=(4, 5))
    return (lambda t: _weighted(t[idx], r)), x


def _sum_axis(rng):
    x = rng.normal(size=(3, 4))
    r = rng.normal(size=3)
    return (lambda t: _weighted(T.sum_(t, axis=1), r)), x


def _mean(rng):
    x = rng.normal(size=(3, 4))
    return (lambda t: T.scale(T.mean(T.mul(t, t)), 3.0)), x


def _tile(rng):
    x = rng.normal(size=(2, 1, 3))
    r = rng.normal(size=(4, 3, 3))
    return (lambda t: _weighted(T.tile(t, (2, 3, 1)), r)), x


def _cross_entropy(rng):
    x = rng.normal(size=(5, 6))
    y = rng.integers(0, 6, size=5)
    m = np.array([1, 1, 0, 1, 1])
    return (lambda t: T.cross_entropy(t, y, m)), x


def _layer_norm(which):
    def case(rng):
        x, g, b = rng.normal(size=(3, 6)), rng.normal(size=6), rng.normal(size=6)
        r = rng.normal(size=(3, 6))
        args = [Tensor(x), Tensor(g), Tensor(b)]

        def f(t):
            a = list(args)
            a[which] = t
            return _weighted(T.layer_norm(*a), r)

        return f, [x, g, b][which]

    return case


def _embedding(rng):
    table = rng.normal(size=(5, 3))
    ids = np.array([[0, 4], [4, 2]])
    r = rng.normal(size=(2, 2, 3))
    return (lambda t: _weighted(T.embedding(t, ids), r)), table


def _attention(which, causal, masked=False):
    def case(rng):
        q = rng.normal(size=(2, 2, 3, 4))
        k = rng.normal(size=(2, 2, 3, 4))
        v = rng.normal(size=(2, 2, 3, 4))
        km = np.array([[True, True, False], [True, True, True]]) if masked else None
        r = rng.normal(size=(2, 2, 3, 4))
        args = [Tensor(q), Tensor(k), Tensor(v)]

        def f(t):
            a = list(args)
            a[which] = t
            return _weighted(T.attention(*a, causal=causal, key_mask=km), r)

        return f, [q, k, v][which]

    return case


def _mask_apply(rng):
    x = rng.normal(size=(3, 4))
    mask = (rng.random((3, 4)) > 0.3) / 0.7
    r = rng.normal(size=(3, 4))
    return (lambda t: _weighted(T.apply_mask(t, mask), r)), x


OP_CASES = {
    "add_a": _binary(T.add, 0),
    "add_b": _binary(T.add, 1),
    "sub_b": _binary(T.sub, 1),
    "mul_a": _binary(T.mul, 0),
    "mul_b": _binary(T.mul, 1),
    "scale": _unary(lambda t: T.scale(t, -1.7)),
    "add_scalar": _unary(lambda t: T.add_scalar(t, 0.3)),
    "exp": _unary(T.exp),
    "log": _unary(T.log, low=0.5, high=3.0),
    "sigmoid": _unary(T.sigmoid),
    "tanh": _unary(T.tanh),
    "relu": _relu,
    "softmax": _unary(T.softmax),
    "log_softmax": _unary(T.log_softmax),
    "reshape": _unary(lambda t: T.reshape(t, (2, 6))),
    "transpose": _unary(lambda t: T.transpose(t, (1, 0))),
    "tile": _tile,
    "concat": _concat,
    "stack": _stack,
    "slice_basic": _slice_basic,
    "slice_fancy": _slice_fancy,
    "sum_axis": _sum_axis,
    "mean": _mean,
    "matmul_a": _matmul(0),
    "matmul_b": _matmul(1),
    "linear_x": _linear(0),
    "linear_w": _linear(1),
    "linear_b": _linear(2),
    "cross_entropy": _cross_entropy,
    "layer_norm_x": _layer_norm(0),
    "layer_norm_gamma": _layer_norm(1),
    "layer_norm_beta": _layer_norm(2),
    "embedding": _embedding,
    "attention_q": _attention(0, True),
    "attention_k": _attention(1, True),
    "attention_v": _attention(2, False, masked=True),
    "attention_k_masked": _attention(1, False, masked=True),
    "dropout_mask": _mask_apply,
}
