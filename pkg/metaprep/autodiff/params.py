from __future__ import annotations
from collections import OrderedDict
from typing import Callable, Dict, Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from metaprep.autodiff import functional as F
from metaprep.autodiff.tensor import Graph, Tensor
from metaprep.errors import ShapeError


class ParamSet:
    """Ordered, named collection of parameter tensors.

    ParamSets are never modified in place: arithmetic returns a new set whose
    version is one past the newest operand. Arithmetic goes through the
    autodiff primitives, so sets holding tracked tensors stay connected to
    their graph.
    """

    def __init__(self, entries: Mapping[str, Union[Tensor, np.ndarray]],
                 version: int = 0):
        self._entries: Dict[str, Tensor] = OrderedDict()
        for name, value in entries.items():
            if not isinstance(value, Tensor):
                value = Tensor(np.array(value, dtype=np.float64))
            self._entries[name] = value
        self.version = version

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return (f"ParamSet({len(self)} tensors, "
                f"{self.num_parameters} values, v{self.version})")

    def names(self):
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def values(self):
        return self._entries.values()

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return OrderedDict((n, t.shape) for n, t in self._entries.items())

    @property
    def num_parameters(self) -> int:
        return int(sum(t.size for t in self._entries.values()))

    def flatten(self) -> np.ndarray:
        if not self._entries:
            return np.zeros(0)
        return np.concatenate(
            [t.values.reshape(-1) for t in self._entries.values()])

    def unflatten(self, vector: np.ndarray) -> ParamSet:
        """build a constant ParamSet with this set's names and shapes

        Args:
            vector (np.ndarray): flat values, length num_parameters

        Raises:
            ShapeError: vector length does not match

        Returns:
            ParamSet: new set holding a copy of vector's values
        """
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.num_parameters,):
            raise ShapeError('unflatten', vector.shape,
                             (self.num_parameters,))
        entries = OrderedDict()
        offset = 0
        for name, tensor in self._entries.items():
            size = tensor.size
            entries[name] = vector[offset:offset + size].reshape(tensor.shape)
            offset += size
        return ParamSet(entries, self.version + 1)

    def detach(self) -> ParamSet:
        return ParamSet(OrderedDict(
            (n, t.detach()) for n, t in self._entries.items()),
            self.version + 1)

    def track(self, graph: Graph) -> ParamSet:
        """register every tensor as a leaf of graph"""
        return ParamSet(OrderedDict(
            (n, graph.leaf(t.values)) for n, t in self._entries.items()),
            self.version)

    def map(self, fn: Callable[[str, Tensor], Tensor]) -> ParamSet:
        return ParamSet(OrderedDict(
            (n, fn(n, t)) for n, t in self._entries.items()),
            self.version + 1)

    def zeros_like(self) -> ParamSet:
        return self.map(lambda n, t: Tensor(np.zeros(t.shape)))

    def compatible(self, other: ParamSet) -> bool:
        return self.shapes() == other.shapes()

    def _require_compatible(self, other: ParamSet, op: str):
        if not self.compatible(other):
            raise ShapeError(op, tuple(self.shapes().items()),
                             tuple(other.shapes().items()))

    def _combine(self, other: ParamSet, fn) -> ParamSet:
        return ParamSet(OrderedDict(
            (n, fn(t, other[n])) for n, t in self._entries.items()),
            max(self.version, other.version) + 1)

    def add(self, other: ParamSet) -> ParamSet:
        self._require_compatible(other, 'add')
        return self._combine(other, F.add)

    def scale(self, factor: float) -> ParamSet:
        factor = Tensor(factor)
        return self.map(lambda n, t: F.mul(t, factor))

    def axpy(self, factor: float, other: ParamSet) -> ParamSet:
        """self + factor * other"""
        self._require_compatible(other, 'axpy')
        factor = Tensor(factor)
        return self._combine(other, lambda a, b: F.add(a, F.mul(factor, b)))

    def subset(self, keep: Callable[[str], bool]) -> ParamSet:
        return ParamSet(OrderedDict(
            (n, t) for n, t in self._entries.items() if keep(n)),
            self.version)

    def merge(self, other: ParamSet) -> ParamSet:
        """union of two sets; names of other replace names of self"""
        entries = OrderedDict(self._entries)
        entries.update(other.items())
        return ParamSet(entries, max(self.version, other.version) + 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flatten()))

    def is_finite(self) -> bool:
        return all(t.is_finite() for t in self._entries.values())

    def equals(self, other: Optional[ParamSet]) -> bool:
        """bit-exact equality of names, shapes and values"""
        if other is None or self.names() != other.names():
            return False
        return all(np.array_equal(t.values, other[n].values)
                   for n, t in self._entries.items())
