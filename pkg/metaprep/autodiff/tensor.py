from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from metaprep.errors import GradError, GraphConsumedError


@dataclass(eq=False)
class Node:
    index: int
    op: Any
    inputs: Tuple[Tensor, ...]
    attrs: Dict[str, Any]
    graph: Graph
    output: Optional[Tensor] = None

    @property
    def is_leaf(self) -> bool:
        return self.op is None


class Graph:
    """Append-only record of the primitive operations behind a computation.

    Nodes are appended in execution order, so every node's inputs precede it
    and the append order is a valid topological order for the backward pass.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.consumed = False
        self._frozen = False

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, values: Union[np.ndarray, float]) -> Tensor:
        """register a differentiable input

        Args:
            values (Union[np.ndarray, float]): initial values

        Returns:
            Tensor: tensor whose gradient can be requested from this graph
        """
        return self._append(None, (), {}, np.array(values, dtype=np.float64))

    def record(self, op: Any, inputs: Sequence[Tensor],
               attrs: Dict[str, Any], values: np.ndarray) -> Tensor:
        return self._append(op, tuple(inputs), attrs, values)

    def _append(self, op, inputs, attrs, values) -> Tensor:
        if self.consumed:
            raise GraphConsumedError(
                "graph was consumed by a backward pass without retain_graph")
        if self._frozen:
            raise GradError(
                "graph is read-only during a backward pass without "
                "create_graph")
        node = Node(len(self.nodes), op, inputs, attrs, self)
        tensor = Tensor(values, node)
        node.output = tensor
        self.nodes.append(node)
        return tensor

    def freeze(self, frozen: bool):
        self._frozen = frozen

    def release(self):
        """drop saved inputs so the graph can be garbage collected"""
        self.consumed = True
        for node in self.nodes:
            node.inputs = ()
            node.attrs = {}


class Tensor:
    """Dense float64 value, optionally attached to a node of a Graph.

    A tensor without a node is a constant: gradients never flow into it.
    """

    __array_priority__ = 100

    def __init__(self, values: Union[np.ndarray, float, Sequence],
                 node: Optional[Node] = None):
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.node = node

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def graph(self) -> Optional[Graph]:
        return None if self.node is None else self.node.graph

    @property
    def requires_grad(self) -> bool:
        return self.node is not None

    def detach(self) -> Tensor:
        return Tensor(self.values)

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() needs a single value, got {self.shape}")
        return float(self.values.reshape(-1)[0])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __repr__(self) -> str:
        tracked = ', tracked' if self.node is not None else ''
        return f"Tensor(shape={self.shape}{tracked})"

    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(other, self)

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(other, self)

    def __neg__(self):
        return F.neg(self)

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(other, self)

    def __truediv__(self, other):
        return F.div(self, other)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __pow__(self, exponent: float):
        return F.power(self, exponent)

    def __getitem__(self, index):
        return F.slice(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return F.reshape(self, tuple(shape))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = axes[0]
        return F.transpose(self, tuple(axes))


def common_graph(tensors: Sequence[Tensor]) -> Optional[Graph]:
    graph = None
    for tensor in tensors:
        if tensor.node is None:
            continue
        if graph is None:
            graph = tensor.node.graph
        elif tensor.node.graph is not graph:
            raise GradError("operation mixes tensors from different graphs")
    return graph


from metaprep.autodiff import functional as F  # noqa: E402
