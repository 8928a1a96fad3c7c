from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from metaprep.errors import ConfigError, UnknownTaskError
from metaprep.tasks.corpus import CLS, PAD, SEP


class TaskTag(Enum):
    MLM = 'MLM'
    NSP = 'NSP'
    QA_MATCH = 'QA_MATCH'
    QQ_MATCH = 'QQ_MATCH'
    DOWNSTREAM_CLS = 'DOWNSTREAM_CLS'
    DOWNSTREAM_PAIR = 'DOWNSTREAM_PAIR'
    DOWNSTREAM_CLOZE = 'DOWNSTREAM_CLOZE'

    @classmethod
    def parse(cls, value) -> TaskTag:
        if isinstance(value, TaskTag):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise UnknownTaskError(f"unknown task tag {value!r}") from None


PRETRAIN_TAGS = (TaskTag.MLM, TaskTag.NSP, TaskTag.QA_MATCH, TaskTag.QQ_MATCH)
PAIR_TAGS = (TaskTag.QA_MATCH, TaskTag.QQ_MATCH)
LABELLED_TAGS = (TaskTag.NSP, TaskTag.QA_MATCH, TaskTag.QQ_MATCH,
                 TaskTag.DOWNSTREAM_CLS, TaskTag.DOWNSTREAM_PAIR,
                 TaskTag.DOWNSTREAM_CLOZE)


@dataclass
class Batch:
    tokens: np.ndarray
    segments: np.ndarray
    attention_mask: np.ndarray
    task_tag: TaskTag
    mask_positions: Optional[List[np.ndarray]] = None
    mask_targets: Optional[List[np.ndarray]] = None
    labels: Optional[np.ndarray] = None
    candidates: Optional[np.ndarray] = None
    blank_positions: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tokens.shape != self.segments.shape or \
                self.tokens.shape != self.attention_mask.shape:
            raise ConfigError('tokens', "tokens, segments and attention_mask "
                              "must share one shape")
        masked = self.mask_positions is not None
        if masked != (self.task_tag is TaskTag.MLM) or \
                masked != (self.mask_targets is not None):
            raise ConfigError('mask_positions',
                              f"{self.task_tag.value} batch mask fields")
        if (self.labels is not None) != (self.task_tag in LABELLED_TAGS):
            raise ConfigError('labels', f"{self.task_tag.value} batch labels")
        cloze = self.task_tag is TaskTag.DOWNSTREAM_CLOZE
        if cloze != (self.candidates is not None) or \
                cloze != (self.blank_positions is not None):
            raise ConfigError('candidates',
                              f"{self.task_tag.value} batch cloze fields")

    @property
    def size(self) -> int:
        return self.tokens.shape[0]

    @property
    def seq_len(self) -> int:
        return self.tokens.shape[1]


Packed = Tuple[List[int], List[int]]


def pack_single(sentence: Sequence[int], max_len: int) -> Packed:
    """[CLS] sentence [SEP], truncated to max_len"""
    body = list(sentence)[:max(max_len - 2, 1)]
    tokens = [CLS] + body + [SEP]
    return tokens, [0] * len(tokens)


def pack_pair(a: Sequence[int], b: Sequence[int], max_len: int) -> Packed:
    """[CLS] a [SEP] b [SEP] with segment ids 0/1, longest side trimmed"""
    a, b = list(a), list(b)
    while len(a) + len(b) + 3 > max_len and (len(a) > 1 or len(b) > 1):
        if len(a) >= len(b):
            a.pop()
        else:
            b.pop()
    tokens = [CLS] + a + [SEP] + b + [SEP]
    segments = [0] * (len(a) + 2) + [1] * (len(b) + 1)
    return tokens, segments


def pad(examples: Sequence[Packed]) -> Tuple[np.ndarray, np.ndarray,
                                             np.ndarray]:
    """right-pad packed examples with PAD

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: tokens, segments and
            attention mask, each [batch, longest]
    """
    width = max(len(tokens) for tokens, _ in examples)
    tokens = np.full((len(examples), width), PAD, dtype=np.int64)
    segments = np.zeros((len(examples), width), dtype=np.int64)
    mask = np.zeros((len(examples), width), dtype=np.int64)
    for i, (toks, segs) in enumerate(examples):
        tokens[i, :len(toks)] = toks
        segments[i, :len(segs)] = segs
        mask[i, :len(toks)] = 1
    return tokens, segments, mask


def labelled_batch(examples: Sequence[Packed], labels: Sequence[int],
                   tag: TaskTag) -> Batch:
    tokens, segments, mask = pad(examples)
    return Batch(tokens, segments, mask, tag,
                 labels=np.asarray(labels, dtype=np.int64))
