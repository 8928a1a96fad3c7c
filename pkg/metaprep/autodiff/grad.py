import logging
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from metaprep.autodiff import functional as F
from metaprep.autodiff.params import ParamSet
from metaprep.autodiff.tensor import Tensor
from metaprep.errors import GradError, GraphConsumedError

logger = logging.getLogger(__name__)


def _backward(output: Tensor, wrt: Sequence[Tensor], create_graph: bool,
              retain_graph: bool) -> List[Tensor]:
    zeros = [Tensor(np.zeros(t.shape)) for t in wrt]
    if output.node is None:
        return zeros

    graph = output.node.graph
    if graph.consumed:
        raise GraphConsumedError(
            "graph was already consumed by a non-retaining backward pass")

    targets = [t.node.index for t in wrt
               if t.node is not None and t.node.graph is graph]
    stop = min(targets) if targets else output.node.index + 1

    adjoint: Dict[int, Tensor] = {
        output.node.index: Tensor(np.ones(output.shape))}

    # nodes appended by a create_graph pass land past output.node.index
    # and are never visited here
    graph.freeze(not create_graph)
    try:
        for index in range(output.node.index, stop - 1, -1):
            node = graph.nodes[index]
            grad_out = adjoint.get(index)
            if grad_out is None or node.is_leaf:
                continue
            if create_graph:
                inputs, out = node.inputs, node.output
            else:
                inputs = [t.detach() for t in node.inputs]
                out = node.output.detach()
            grads = node.op.backward(grad_out, inputs, out, **node.attrs)
            for source, g in zip(node.inputs, grads):
                if g is None or source.node is None:
                    continue
                j = source.node.index
                adjoint[j] = g if j not in adjoint else F.add(adjoint[j], g)
    finally:
        graph.freeze(False)

    results = []
    for tensor, zero in zip(wrt, zeros):
        found = None
        if tensor.node is not None and tensor.node.graph is graph:
            found = adjoint.get(tensor.node.index)
        results.append(zero if found is None else found)

    if not retain_graph:
        graph.release()
    return results


def grad(output: Tensor, wrt: Union[ParamSet, Sequence[Tensor]],
         create_graph: bool = False,
         retain_graph: Optional[bool] = None) -> Union[ParamSet, List[Tensor]]:
    """reverse-mode gradient of a scalar

    Args:
        output (Tensor): scalar to differentiate
        wrt (Union[ParamSet, Sequence[Tensor]]): tensors to differentiate
            against; entries the output does not depend on get zeros
        create_graph (bool): record the backward computation so the returned
            gradients can be differentiated again
        retain_graph (Optional[bool]): keep the graph usable for another
            backward pass; defaults to create_graph

    Raises:
        GradError: output is not a scalar
        GraphConsumedError: graph released by an earlier backward pass

    Returns:
        Union[ParamSet, List[Tensor]]: gradients shaped like wrt
    """
    if output.size != 1:
        raise GradError(
            f"grad needs a scalar output, got shape {output.shape}")
    retain = create_graph if retain_graph is None else retain_graph

    if isinstance(wrt, ParamSet):
        grads = _backward(output, list(wrt.values()), create_graph, retain)
        return ParamSet(dict(zip(wrt.names(), grads)), wrt.version + 1)
    return _backward(output, list(wrt), create_graph, retain)


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_difference_grad(loss_fn: Callable[[ParamSet], Union[Tensor, float]],
                           at: ParamSet, h: float = 1e-5) -> ParamSet:
    """central-difference gradient, one coordinate at a time

    Args:
        loss_fn (Callable[[ParamSet], Union[Tensor, float]]): deterministic
            scalar function of the parameters
        at (ParamSet): evaluation point
        h (float): step, must be positive

    Returns:
        ParamSet: constant gradient estimate shaped like at
    """
    if h <= 0:
        raise ValueError("finite difference step must be positive")
    base = at.detach().flatten()
    out = np.zeros_like(base)
    for i in range(base.size):
        plus = base.copy()
        plus[i] += h
        minus = base.copy()
        minus[i] -= h
        out[i] = (_scalar(loss_fn(at.unflatten(plus))) -
                  _scalar(loss_fn(at.unflatten(minus)))) / (2.0 * h)
    logger.debug("finite differences over %d coordinates", base.size)
    return at.unflatten(out)


def relative_error(a: Union[ParamSet, np.ndarray, float],
                   b: Union[ParamSet, np.ndarray, float]) -> float:
    """max-norm relative error, max|a - b| / max(max|a|, max|b|)"""
    a = a.flatten() if isinstance(a, ParamSet) else np.ravel(a)
    b = b.flatten() if isinstance(b, ParamSet) else np.ravel(b)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))
    diff = np.max(np.abs(a - b), initial=0.0)
    if scale == 0.0:
        return float(diff)
    return float(diff / scale)
