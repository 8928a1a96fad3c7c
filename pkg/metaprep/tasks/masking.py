from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from metaprep.errors import ConfigError, DegenerateBatchError
from metaprep.tasks.batch import Batch, TaskTag, pad
from metaprep.tasks.corpus import FIRST_CONTENT, MASK
from metaprep.tasks.stream import SeedStream


@dataclass(frozen=True)
class MaskingScheme:
    """Selection rate, then the MASK / random-token split of selections.

    Whatever remains after mask and random keeps the original token.
    """

    select: float = 0.15
    mask: float = 0.8
    random: float = 0.1

    def __post_init__(self):
        for name in ('select', 'mask', 'random'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(name, f"probability out of range: {value}")
        if self.mask + self.random > 1.0 + 1e-12:
            raise ConfigError('random', "mask + random exceeds 1")

    @property
    def keep(self) -> float:
        return max(0.0, 1.0 - self.mask - self.random)


def mask_example(tokens: Sequence[int], stream: SeedStream, vocab_size: int,
                 scheme: MaskingScheme = MaskingScheme()):
    """corrupt one token sequence for masked language modeling

    Every content token is selected independently; when nothing is selected
    one maskable position is forced so the example always has a target.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: corrupted tokens,
            selected positions, original ids at those positions
    """
    original = np.asarray(tokens, dtype=np.int64)
    maskable = original >= FIRST_CONTENT
    if not maskable.any():
        raise DegenerateBatchError("example has no maskable token")

    selected = (stream.random(len(original)) < scheme.select) & maskable
    if not selected.any():
        selected[int(stream.choice(np.flatnonzero(maskable)))] = True

    positions = np.flatnonzero(selected)
    targets = original[positions].copy()

    u = stream.random(len(positions))
    replacements = stream.integers(FIRST_CONTENT, vocab_size, len(positions))
    corrupted = original.copy()
    to_mask = u < scheme.mask
    to_random = (u >= scheme.mask) & (u < scheme.mask + scheme.random)
    corrupted[positions[to_mask]] = MASK
    corrupted[positions[to_random]] = replacements[to_random]
    return corrupted, positions, targets


def mask_batch(examples: Sequence[Sequence[int]], stream: SeedStream,
               vocab_size: int, scheme: MaskingScheme = MaskingScheme(),
               segments: Optional[Sequence[Sequence[int]]] = None) -> Batch:
    """build an MLM batch from packed token sequences

    Args:
        examples (Sequence[Sequence[int]]): packed sequences ([CLS] ... [SEP])
        stream (SeedStream): randomness source, consumed in example order
        vocab_size (int): vocabulary size, bounds random replacements
        scheme (MaskingScheme): selection and replacement probabilities
        segments (Optional[Sequence[Sequence[int]]]): segment ids per
            example, zeros when omitted

    Raises:
        DegenerateBatchError: an example has no maskable token

    Returns:
        Batch: MLM batch whose mask_targets hold the original ids
    """
    if segments is None:
        segments = [[0] * len(ex) for ex in examples]

    packed, positions, targets = [], [], []
    for tokens, segs in zip(examples, segments):
        corrupted, pos, tgt = mask_example(tokens, stream, vocab_size, scheme)
        packed.append((corrupted.tolist(), list(segs)))
        positions.append(pos)
        targets.append(tgt)

    tokens, segs, mask = pad(packed)
    return Batch(tokens, segs, mask, TaskTag.MLM,
                 mask_positions=positions, mask_targets=targets)
