from __future__ import annotations
import zlib
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode('utf-8'))


class SeedStream:
    """Named, splittable random stream on numpy's counter-based Philox.

    A child stream depends only on the root seed and its name path, never on
    how much of the parent has been consumed, so adding a consumer does not
    shift anyone else's numbers.
    """

    def __init__(self, seed: int, name: str = 'root',
                 path: Tuple[int, ...] = ()):
        self.seed = int(seed)
        self.name = name
        self.path = tuple(path)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"SeedStream({self.seed}, {self.name!r})"

    def child(self, name: str) -> SeedStream:
        return SeedStream(self.seed, f"{self.name}/{name}",
                          self.path + (_name_key(name),))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low: int, high: Optional[int] = None, size=None):
        return self.generator.integers(low, high, size)

    def bernoulli(self, p: float, size=None):
        return self.generator.random(size) < p

    def choice(self, options, size=None, replace: bool = True,
               p: Optional[Sequence[float]] = None):
        return self.generator.choice(options, size=size, replace=replace,
                                     p=p)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def state(self) -> Dict[str, Any]:
        """JSON-serializable stream position"""
        raw = self.generator.bit_generator.state
        return {
            'seed': self.seed,
            'name': self.name,
            'path': list(self.path),
            'counter': [int(v) for v in raw['state']['counter']],
            'key': [int(v) for v in raw['state']['key']],
            'buffer': [int(v) for v in raw['buffer']],
            'buffer_pos': int(raw['buffer_pos']),
            'has_uint32': int(raw['has_uint32']),
            'uinteger': int(raw['uinteger']),
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> SeedStream:
        stream = cls(state['seed'], state['name'], tuple(state['path']))
        stream.generator.bit_generator.state = {
            'bit_generator': 'Philox',
            'state': {
                'counter': np.array(state['counter'], dtype=np.uint64),
                'key': np.array(state['key'], dtype=np.uint64),
            },
            'buffer': np.array(state['buffer'], dtype=np.uint64),
            'buffer_pos': state['buffer_pos'],
            'has_uint32': state['has_uint32'],
            'uinteger': state['uinteger'],
        }
        return stream
