import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from metaprep.errors import ConfigError, DegenerateTaskError
from metaprep.tasks import Batch, FIRST_CONTENT, MASK, MarkovGenerator, \
    SeedStream, TaskTag, labelled_batch, pack_pair, pack_single, pad

logger = logging.getLogger(__name__)

N_CANDIDATES = 4
MAX_ATTEMPTS = 10


class DownstreamKind(Enum):
    SINGLE_SENTENCE_CLS = 'SINGLE_SENTENCE_CLS'
    PAIR_CLS = 'PAIR_CLS'
    CLOZE = 'CLOZE'

    @property
    def tag(self) -> TaskTag:
        return {
            DownstreamKind.SINGLE_SENTENCE_CLS: TaskTag.DOWNSTREAM_CLS,
            DownstreamKind.PAIR_CLS: TaskTag.DOWNSTREAM_PAIR,
            DownstreamKind.CLOZE: TaskTag.DOWNSTREAM_CLOZE,
        }[self]


VALID_CLASSES = {
    DownstreamKind.SINGLE_SENTENCE_CLS: (2, 5),
    DownstreamKind.PAIR_CLS: (2, 3),
    DownstreamKind.CLOZE: (N_CANDIDATES,),
}


@dataclass
class DownstreamTask:
    kind: DownstreamKind
    n_classes: int
    train: List[Batch]
    dev: List[Batch]
    test: List[Batch]
    name: str
    seed: int = 0
    majority_baseline: float = field(default=0.0, compare=False)

    def split(self, name: str) -> List[Batch]:
        if name not in ('train', 'dev', 'test'):
            raise KeyError(name)
        return getattr(self, name)

    def split_size(self, name: str) -> int:
        return sum(b.size for b in self.split(name))

    def labels(self, name: str) -> np.ndarray:
        return np.concatenate([b.labels for b in self.split(name)])


def _balanced_labels(count: int, n_classes: int,
                     stream: SeedStream) -> np.ndarray:
    labels = np.arange(count) % n_classes
    return labels[stream.permutation(count)]


def _noisy(label: int, n_classes: int, noise: float,
           stream: SeedStream) -> int:
    if noise > 0 and stream.random() < noise:
        return int((label + stream.integers(1, n_classes)) % n_classes)
    return label


class _Builder:
    """Draws labelled examples of one downstream kind"""

    def __init__(self, kind: DownstreamKind, n_classes: int,
                 generator: MarkovGenerator, max_len: int,
                 min_sentence: int, max_sentence: int):
        self.kind = kind
        self.n_classes = n_classes
        self.generator = generator
        self.max_len = max_len
        self.min_sentence = min_sentence
        self.max_sentence = max_sentence
        # label c of a sentence task owns the c-th group of topics
        self.topic_groups = np.array_split(np.arange(generator.n_topics),
                                           n_classes)

    def _length(self, stream: SeedStream) -> int:
        return int(stream.integers(self.min_sentence, self.max_sentence + 1))

    def _sentence(self, topic: int, stream: SeedStream, context=None):
        return self.generator.sentence(topic, stream, self._length(stream),
                                       context)

    def single(self, label: int, stream: SeedStream):
        group = self.topic_groups[label]
        topic = int(group[int(stream.integers(len(group)))])
        return pack_single(self._sentence(topic, stream), self.max_len), None

    def pair(self, label: int, stream: SeedStream):
        """0: topics differ, 1: same topic, 2: B continues A"""
        n_topics = self.generator.n_topics
        topic_a = int(stream.integers(n_topics))
        topic_b = topic_a if label else \
            (topic_a + int(stream.integers(1, n_topics))) % n_topics
        a = self._sentence(topic_a, stream)
        b = self._sentence(topic_b, stream, a if label == 2 else None)
        return pack_pair(a, b, self.max_len), None

    def cloze(self, label: int, stream: SeedStream):
        topic = int(stream.integers(self.generator.n_topics))
        sentence = self._sentence(topic, stream)
        tokens, segments = pack_single(sentence, self.max_len)
        blank = int(stream.integers(1, len(tokens) - 1))
        answer = tokens[blank]
        tokens[blank] = MASK

        pool = np.setdiff1d(np.arange(FIRST_CONTENT,
                                      self.generator.vocab_size), [answer])
        distractors = stream.choice(pool, size=N_CANDIDATES - 1,
                                    replace=False)
        candidates = np.insert(distractors, label, answer).astype(np.int64)
        return (tokens, segments), (blank, candidates)

    def example(self, label: int, stream: SeedStream):
        if self.kind is DownstreamKind.SINGLE_SENTENCE_CLS:
            return self.single(label, stream)
        if self.kind is DownstreamKind.PAIR_CLS:
            return self.pair(label, stream)
        return self.cloze(label, stream)


def _batches(kind: DownstreamKind, examples, labels,
             batch_size: int) -> List[Batch]:
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        chunk_labels = labels[start:start + batch_size]
        packed = [packed for packed, _ in chunk]
        if kind is DownstreamKind.CLOZE:
            tokens, segments, mask = pad(packed)
            batches.append(Batch(
                tokens, segments, mask, kind.tag,
                labels=np.asarray(chunk_labels, dtype=np.int64),
                blank_positions=np.array([c[0] for _, c in chunk]),
                candidates=np.stack([c[1] for _, c in chunk])))
        else:
            batches.append(labelled_batch(packed, chunk_labels, kind.tag))
    return batches


def _majority(labels: np.ndarray, n_classes: int) -> float:
    return float(np.max(np.bincount(labels, minlength=n_classes)) /
                 len(labels))


def synth_downstream(kind, seed: int,
                     sizes: Sequence[int] = (64, 64, 64),
                     generator: Optional[MarkovGenerator] = None,
                     vocab_size: int = 64, n_topics: int = 6,
                     corpus_seed: int = 0, n_classes: Optional[int] = None,
                     batch_size: int = 8, max_len: int = 32,
                     min_sentence: int = 4, max_sentence: int = 8,
                     label_noise: float = 0.0,
                     max_majority: float = 0.55,
                     name: Optional[str] = None) -> DownstreamTask:
    """generate a synthetic downstream task from the corpus grammar

    Sentence classification labels a sentence by its topic group, pair
    classification by whether both sides share a topic (three classes add
    a true continuation), cloze asks for the blanked token among four
    candidates. Labels are balanced per split.

    Args:
        kind: DownstreamKind or its name
        seed (int): generation seed; attempt i uses seed + i
        sizes (Sequence[int]): train, dev and test example counts
        generator (Optional[MarkovGenerator]): grammar; by default the one of
            the pre-training corpus (vocab_size, n_topics, corpus_seed)
        n_classes (Optional[int]): 2 or 5 for sentences, 2 or 3 for pairs
        label_noise (float): probability of replacing a label by another
        max_majority (float): largest accepted majority-class rate on any
            split

    Raises:
        ConfigError: invalid sizes or class count
        DegenerateTaskError: no attempt passed the majority check

    Returns:
        DownstreamTask: deterministic for the arguments
    """
    kind = DownstreamKind(kind)
    if n_classes is None:
        n_classes = VALID_CLASSES[kind][0]
    if n_classes not in VALID_CLASSES[kind]:
        raise ConfigError('finetune.n_classes',
                          f"{kind.value} supports {VALID_CLASSES[kind]}")
    if len(sizes) != 3 or min(sizes) < 32:
        raise ConfigError('finetune.sizes',
                          "need train, dev and test sizes of at least 32")
    if generator is None:
        generator = MarkovGenerator(vocab_size, n_topics, corpus_seed)
    if generator.n_topics < n_classes:
        raise ConfigError('data.n_topics',
                          f"{n_classes} classes need as many topics")
    name = name or f"{kind.value.lower()}{n_classes}"
    builder = _Builder(kind, n_classes, generator, max_len, min_sentence,
                       max_sentence)

    for attempt in range(MAX_ATTEMPTS):
        attempt_seed = seed + attempt
        root = SeedStream(attempt_seed, 'downstream').child(name)
        splits, majority = {}, 0.0
        for split, size in zip(('train', 'dev', 'test'), sizes):
            stream = root.child(split)
            clean = _balanced_labels(size, n_classes, stream)
            examples = [builder.example(int(label), stream)
                        for label in clean]
            labels = [_noisy(int(label), n_classes, label_noise, stream)
                      for label in clean]
            splits[split] = _batches(kind, examples, labels, batch_size)
            majority = max(majority,
                           _majority(np.asarray(labels), n_classes))
        if majority <= max_majority:
            return DownstreamTask(kind, n_classes, splits['train'],
                                  splits['dev'], splits['test'], name,
                                  attempt_seed, majority)
        logger.warning("%s seed %d: majority baseline %.3f, regenerating",
                       name, attempt_seed, majority)
    raise DegenerateTaskError(
        f"{name}: no balanced task after {MAX_ATTEMPTS} attempts")
