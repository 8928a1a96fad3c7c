from __future__ import annotations
from typing import Any, Sequence, Tuple

import numpy as np

from metaprep.autodiff.tensor import Tensor
from metaprep.autodiff.ops import forward_op


def as_tensor(x: Any) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def add(a, b) -> Tensor:
    return forward_op('add', [a, b])


def mul(a, b) -> Tensor:
    return forward_op('mul', [a, b])


def neg(x) -> Tensor:
    return mul(x, Tensor(-1.0))


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def power(x, exponent: float) -> Tensor:
    return forward_op('power', [x], exponent=float(exponent))


def div(a, b) -> Tensor:
    if isinstance(b, Tensor):
        return mul(a, power(b, -1.0))
    return mul(a, Tensor(1.0 / np.asarray(b, dtype=np.float64)))


def matmul(a, b) -> Tensor:
    return forward_op('matmul', [a, b])


def transpose(x, axes: Sequence[int]) -> Tensor:
    return forward_op('transpose', [x], axes=tuple(int(a) for a in axes))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def reshape(x, shape: Sequence[int]) -> Tensor:
    return forward_op('reshape', [x], shape=tuple(int(s) for s in shape))


def slice(x, index) -> Tensor:
    if not isinstance(index, tuple):
        index = (index,)
    return forward_op('slice', [x], index=index)


def unslice(x, index, shape: Tuple[int, ...]) -> Tensor:
    return forward_op('unslice', [x], index=index, shape=tuple(shape))


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    return forward_op('concat', list(xs), axis=axis)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    return forward_op('sum', [x], axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    return forward_op('mean', [x], axis=axis, keepdims=keepdims)


def broadcast_to(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if x.shape == tuple(shape):
        return x
    return forward_op('broadcast_to', [x], shape=tuple(shape))


def sum_to(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if x.shape == tuple(shape):
        return x
    return forward_op('sum_to', [x], shape=tuple(shape))


def softmax(x, axis: int = -1) -> Tensor:
    return forward_op('softmax', [x], axis=axis)


def log(x) -> Tensor:
    return forward_op('log', [x])


def exp(x) -> Tensor:
    return forward_op('exp', [x])


def tanh(x) -> Tensor:
    return forward_op('tanh', [x])


def normal_cdf(x) -> Tensor:
    return forward_op('normal_cdf', [x])


def gelu(x) -> Tensor:
    return forward_op('gelu', [x])


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    return forward_op('layer_norm', [x, gain, bias], eps=eps)


def gather(table, ids) -> Tensor:
    return forward_op('gather', [table], ids=np.asarray(ids, dtype=np.int64))


def scatter_rows(x, ids, rows: int) -> Tensor:
    return forward_op('scatter_rows', [x],
                      ids=np.asarray(ids, dtype=np.int64), rows=rows)


def cross_entropy(logits, targets) -> Tensor:
    return forward_op('cross_entropy', [logits],
                      targets=np.asarray(targets, dtype=np.int64))


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """inverted dropout with a constant keep mask drawn from rng"""
    if rate <= 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    return mul(x, Tensor(keep / (1.0 - rate)))
