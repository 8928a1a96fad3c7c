"""Closed set of differentiable primitives.

Every backward rule is written with the functional wrappers, so when a
backward pass runs with create_graph the gradient computation is itself
recorded and can be differentiated again.
"""
from __future__ import annotations
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

from metaprep.autodiff.tensor import Tensor, common_graph
from metaprep.errors import IdRangeError, ShapeError, UnknownOpError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

Grads = Tuple[Optional[Tensor], ...]


class Op:
    """Base class for primitives"""

    name = ''

    def check(self, shapes: List[Tuple[int, ...]], **attrs):
        """raise ShapeError when the input shapes are invalid"""

    def forward(self, *values: np.ndarray, **attrs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: Tensor, inputs: Sequence[Tensor],
                 output: Tensor, **attrs) -> Grads:
        raise NotImplementedError


OPS: Dict[str, Op] = {}


def register(cls):
    OPS[cls.name] = cls()
    return cls


def forward_op(kind: str, inputs: Sequence[Any], **attrs) -> Tensor:
    """evaluate a primitive and record it on the graph of its inputs

    Args:
        kind (str): primitive name, one of OPS
        inputs (Sequence[Any]): tensors or array-likes (array-likes are
            treated as constants)

    Raises:
        UnknownOpError: kind is not a registered primitive
        ShapeError: input shapes invalid for the primitive

    Returns:
        Tensor: result, tracked when any input is tracked
    """
    try:
        op = OPS[kind]
    except KeyError:
        raise UnknownOpError(f"unknown primitive {kind!r}") from None

    tensors = [F.as_tensor(x) for x in inputs]
    op.check([t.shape for t in tensors], **attrs)
    values = op.forward(*(t.values for t in tensors), **attrs)

    graph = common_graph(tensors)
    if graph is None:
        return Tensor(values)
    return graph.record(op, tensors, attrs, values)


def _broadcast(name: str, a: Tuple[int, ...], b: Tuple[int, ...]):
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(name, a, b) from None


def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def _kept_shape(shape, axis) -> Tuple[int, ...]:
    axes = _normalize_axes(axis, len(shape))
    return tuple(1 if i in axes else s for i, s in enumerate(shape))


@register
class Add(Op):
    name = 'add'

    def check(self, shapes, **attrs):
        _broadcast(self.name, *shapes)

    def forward(self, a, b):
        return a + b

    def backward(self, grad, inputs, output):
        a, b = inputs
        return F.sum_to(grad, a.shape), F.sum_to(grad, b.shape)


@register
class Mul(Op):
    name = 'mul'

    def check(self, shapes, **attrs):
        _broadcast(self.name, *shapes)

    def forward(self, a, b):
        return a * b

    def backward(self, grad, inputs, output):
        a, b = inputs
        return (F.sum_to(F.mul(grad, b), a.shape),
                F.sum_to(F.mul(grad, a), b.shape))


@register
class Power(Op):
    name = 'power'

    def forward(self, x, exponent: float):
        return np.power(x, exponent)

    def backward(self, grad, inputs, output, exponent: float):
        (x,) = inputs
        local = F.mul(Tensor(exponent), F.power(x, exponent - 1.0))
        return (F.mul(grad, local),)


@register
class Matmul(Op):
    name = 'matmul'

    def check(self, shapes, **attrs):
        a, b = shapes
        if len(a) < 2 or len(b) < 2 or a[-1] != b[-2]:
            raise ShapeError(self.name, a, b)
        _broadcast(self.name, a[:-2], b[:-2])

    def forward(self, a, b):
        return np.matmul(a, b)

    def backward(self, grad, inputs, output):
        a, b = inputs
        grad_a = F.matmul(grad, F.swap_last(b))
        grad_b = F.matmul(F.swap_last(a), grad)
        return F.sum_to(grad_a, a.shape), F.sum_to(grad_b, b.shape)


@register
class Transpose(Op):
    name = 'transpose'

    def check(self, shapes, axes):
        if sorted(axes) != list(range(len(shapes[0]))):
            raise ShapeError(f"{self.name}{tuple(axes)}", shapes[0])

    def forward(self, x, axes):
        return np.transpose(x, axes)

    def backward(self, grad, inputs, output, axes):
        inverse = tuple(int(i) for i in np.argsort(axes))
        return (F.transpose(grad, inverse),)


@register
class Reshape(Op):
    name = 'reshape'

    def check(self, shapes, shape):
        if int(np.prod(shapes[0])) != int(np.prod(shape)):
            raise ShapeError(self.name, shapes[0], shape)

    def forward(self, x, shape):
        return np.reshape(x, shape)

    def backward(self, grad, inputs, output, shape):
        return (F.reshape(grad, inputs[0].shape),)


@register
class Slice(Op):
    name = 'slice'

    def check(self, shapes, index):
        try:
            np.broadcast_to(0.0, shapes[0])[index]
        except (IndexError, TypeError):
            raise ShapeError(f"{self.name}[{index}]", shapes[0]) from None

    def forward(self, x, index):
        return np.array(x[index])

    def backward(self, grad, inputs, output, index):
        return (F.unslice(grad, index, inputs[0].shape),)


@register
class Unslice(Op):
    """Adjoint of slice: places values into zeros of the source shape"""

    name = 'unslice'

    def forward(self, x, index, shape):
        out = np.zeros(shape)
        out[index] = x
        return out

    def backward(self, grad, inputs, output, index, shape):
        return (F.slice(grad, index),)


@register
class Concat(Op):
    name = 'concat'

    def check(self, shapes, axis):
        first = shapes[0]
        ax = axis % len(first)
        for shape in shapes[1:]:
            if len(shape) != len(first) or any(
                    s != f for i, (s, f) in enumerate(zip(shape, first))
                    if i != ax):
                raise ShapeError(self.name, *shapes)

    def forward(self, *xs, axis):
        return np.concatenate(xs, axis=axis)

    def backward(self, grad, inputs, output, axis):
        ax = axis % grad.ndim
        grads = []
        start = 0
        for x in inputs:
            stop = start + x.shape[ax]
            index = (slice(None),) * ax + (slice(start, stop),)
            grads.append(F.slice(grad, index))
            start = stop
        return tuple(grads)


@register
class Sum(Op):
    name = 'sum'

    def forward(self, x, axis=None, keepdims=False):
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad, inputs, output, axis=None, keepdims=False):
        shape = inputs[0].shape
        kept = F.reshape(grad, _kept_shape(shape, axis))
        return (F.broadcast_to(kept, shape),)


@register
class Mean(Op):
    name = 'mean'

    def forward(self, x, axis=None, keepdims=False):
        return np.mean(x, axis=axis, keepdims=keepdims)

    def backward(self, grad, inputs, output, axis=None, keepdims=False):
        shape = inputs[0].shape
        count = int(np.prod(shape)) // max(int(np.prod(output.shape)), 1)
        kept = F.reshape(grad, _kept_shape(shape, axis))
        return (F.mul(F.broadcast_to(kept, shape), Tensor(1.0 / count)),)


@register
class BroadcastTo(Op):
    name = 'broadcast_to'

    def check(self, shapes, shape):
        if _broadcast(self.name, shapes[0], shape) != tuple(shape):
            raise ShapeError(self.name, shapes[0], shape)

    def forward(self, x, shape):
        return np.array(np.broadcast_to(x, shape))

    def backward(self, grad, inputs, output, shape):
        return (F.sum_to(grad, inputs[0].shape),)


@register
class SumTo(Op):
    """Adjoint of broadcast_to: sums the broadcast axes away"""

    name = 'sum_to'

    def check(self, shapes, shape):
        if _broadcast(self.name, shapes[0], shape) != tuple(shapes[0]):
            raise ShapeError(self.name, shapes[0], shape)

    def forward(self, x, shape):
        lead = x.ndim - len(shape)
        axes = tuple(range(lead)) + tuple(
            lead + i for i, s in enumerate(shape)
            if s == 1 and x.shape[lead + i] != 1)
        return np.sum(x, axis=axes, keepdims=True).reshape(shape)

    def backward(self, grad, inputs, output, shape):
        return (F.broadcast_to(grad, inputs[0].shape),)


@register
class Softmax(Op):
    name = 'softmax'

    def forward(self, x, axis=-1):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=axis, keepdims=True)

    def backward(self, grad, inputs, output, axis=-1):
        y = output
        inner = F.sum(F.mul(grad, y), axis=axis, keepdims=True)
        return (F.mul(y, F.sub(grad, inner)),)


@register
class Log(Op):
    name = 'log'

    def forward(self, x):
        return np.log(x)

    def backward(self, grad, inputs, output):
        return (F.mul(grad, F.power(inputs[0], -1.0)),)


@register
class Exp(Op):
    name = 'exp'

    def forward(self, x):
        return np.exp(x)

    def backward(self, grad, inputs, output):
        return (F.mul(grad, output),)


@register
class Tanh(Op):
    name = 'tanh'

    def forward(self, x):
        return np.tanh(x)

    def backward(self, grad, inputs, output):
        return (F.mul(grad, F.sub(Tensor(1.0), F.mul(output, output))),)


def _normal_pdf(x: Tensor) -> Tensor:
    return F.mul(Tensor(INV_SQRT_2PI),
                 F.exp(F.mul(Tensor(-0.5), F.mul(x, x))))


@register
class NormalCdf(Op):
    name = 'normal_cdf'

    def forward(self, x):
        return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))

    def backward(self, grad, inputs, output):
        return (F.mul(grad, _normal_pdf(inputs[0])),)


@register
class Gelu(Op):
    """Gaussian error linear unit, exact form x * Phi(x)"""

    name = 'gelu'

    def forward(self, x):
        return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))

    def backward(self, grad, inputs, output):
        (x,) = inputs
        local = F.add(F.normal_cdf(x), F.mul(x, _normal_pdf(x)))
        return (F.mul(grad, local),)


@register
class LayerNorm(Op):
    name = 'layer_norm'

    def check(self, shapes, eps):
        x, gain, bias = shapes
        if not x or gain != (x[-1],) or bias != (x[-1],):
            raise ShapeError(self.name, x, gain, bias)

    def forward(self, x, gain, bias, eps):
        centered = x - np.mean(x, axis=-1, keepdims=True)
        var = np.mean(centered * centered, axis=-1, keepdims=True)
        return centered / np.sqrt(var + eps) * gain + bias

    def backward(self, grad, inputs, output, eps):
        x, gain, bias = inputs
        centered = F.sub(x, F.mean(x, axis=-1, keepdims=True))
        var = F.mean(F.mul(centered, centered), axis=-1, keepdims=True)
        rstd = F.power(F.add(var, Tensor(eps)), -0.5)
        normed = F.mul(centered, rstd)

        grad_normed = F.mul(grad, gain)
        grad_x = F.mul(rstd, F.sub(
            F.sub(grad_normed, F.mean(grad_normed, axis=-1, keepdims=True)),
            F.mul(normed, F.mean(F.mul(grad_normed, normed),
                                 axis=-1, keepdims=True))))
        return (grad_x,
                F.sum_to(F.mul(grad, normed), gain.shape),
                F.sum_to(grad, bias.shape))


def _check_ids(name: str, ids: np.ndarray, limit: int):
    if ids.size and (ids.min() < 0 or ids.max() >= limit):
        raise IdRangeError(
            f"{name}: ids must lie in [0, {limit}), got "
            f"[{ids.min()}, {ids.max()}]")


@register
class Gather(Op):
    """Embedding lookup: rows of a [V, D] table selected by integer ids"""

    name = 'gather'

    def check(self, shapes, ids):
        if len(shapes[0]) != 2:
            raise ShapeError(self.name, shapes[0])
        _check_ids(self.name, np.asarray(ids), shapes[0][0])

    def forward(self, table, ids):
        return table[ids]

    def backward(self, grad, inputs, output, ids):
        return (F.scatter_rows(grad, ids, inputs[0].shape[0]),)


@register
class ScatterRows(Op):
    """Adjoint of gather: accumulates rows back into a [V, D] table"""

    name = 'scatter_rows'

    def forward(self, x, ids, rows):
        ids = np.asarray(ids)
        out = np.zeros((rows, x.shape[-1]))
        np.add.at(out, ids.reshape(-1), x.reshape(-1, x.shape[-1]))
        return out

    def backward(self, grad, inputs, output, ids, rows):
        return (F.gather(grad, ids),)


@register
class CrossEntropy(Op):
    """Mean cross-entropy of [N, C] logits against integer targets"""

    name = 'cross_entropy'

    def check(self, shapes, targets):
        targets = np.asarray(targets)
        if len(shapes[0]) != 2 or targets.shape != (shapes[0][0],):
            raise ShapeError(self.name, shapes[0], targets.shape)
        _check_ids(self.name, targets, shapes[0][1])

    def forward(self, logits, targets):
        targets = np.asarray(targets)
        top = np.max(logits, axis=1, keepdims=True)
        lse = top[:, 0] + np.log(np.sum(np.exp(logits - top), axis=1))
        picked = logits[np.arange(len(targets)), targets]
        return np.mean(lse - picked)

    def backward(self, grad, inputs, output, targets):
        (logits,) = inputs
        targets = np.asarray(targets)
        n, classes = logits.shape
        onehot = np.zeros((n, classes))
        onehot[np.arange(n), targets] = 1.0
        delta = F.sub(F.softmax(logits, axis=-1), Tensor(onehot))
        return (F.mul(delta, F.mul(grad, Tensor(1.0 / n))),)


from metaprep.autodiff import functional as F  # noqa: E402
