import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Union

import numpy as np

from metaprep.errors import ConfigError
from metaprep.tasks.batch import Batch, PAIR_TAGS, PRETRAIN_TAGS, TaskTag, \
    pack_pair
from metaprep.tasks.corpus import Corpus, generate_corpus
from metaprep.tasks.masking import MaskingScheme, mask_batch
from metaprep.tasks.pairs import make_nsp_batch, make_pair_task_batch
from metaprep.tasks.stream import SeedStream

logger = logging.getLogger(__name__)

TaskMix = Dict[TaskTag, float]


def parse_mix(mix: Mapping[Union[str, TaskTag], float]) -> TaskMix:
    """validate a task-probability map, ordering it by tag declaration

    Raises:
        ConfigError: empty map, negative weight, non-pre-training tag or
            probabilities not summing to 1

    Returns:
        TaskMix: tag -> probability
    """
    if not mix:
        raise ConfigError('tasks.mix', "task mix is empty")
    parsed = {TaskTag.parse(tag): float(p) for tag, p in mix.items()}
    for tag, p in parsed.items():
        if tag not in PRETRAIN_TAGS:
            raise ConfigError('tasks.mix', f"{tag.value} is not a "
                              "pre-training task")
        if p < 0:
            raise ConfigError('tasks.mix', f"negative weight for {tag.value}")
    total = sum(parsed.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError('tasks.mix', f"probabilities sum to {total}, not 1")
    return {tag: parsed[tag] for tag in PRETRAIN_TAGS if tag in parsed}


@dataclass(frozen=True)
class SamplerConfig:
    batch_size: int = 8
    max_len: int = 32
    n_docs: int = 200
    n_topics: int = 6
    corpus_seed: int = 0
    min_sentence: int = 4
    max_sentence: int = 12
    mask_select: float = 0.15
    mask_mask: float = 0.8
    mask_random: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError('data.batch_size', "must be positive")
        if self.max_len < 2 * self.max_sentence + 3:
            raise ConfigError('model.max_len', "too short for a packed pair "
                              f"of {self.max_sentence}-token sentences")

    @property
    def masking(self) -> MaskingScheme:
        return MaskingScheme(self.mask_select, self.mask_mask,
                             self.mask_random)


class PretrainSampler:
    """Produces one pre-training batch per task tag from a shared corpus"""

    def __init__(self, corpus: Corpus,
                 config: SamplerConfig = SamplerConfig()):
        self.corpus = corpus
        self.config = config

    @classmethod
    def from_config(cls, config: SamplerConfig, vocab_size: int):
        corpus = generate_corpus(
            config.corpus_seed, config.n_docs, vocab_size,
            n_topics=config.n_topics, min_len=config.min_sentence,
            max_len=config.max_sentence)
        return cls(corpus, config)

    def _mlm(self, stream: SeedStream) -> Batch:
        examples, segments = [], []
        docs = self.corpus.documents
        for _ in range(self.config.batch_size):
            doc = docs[int(stream.integers(len(docs)))]
            i = int(stream.integers(len(doc) - 1))
            tokens, segs = pack_pair(doc[i], doc[i + 1], self.config.max_len)
            examples.append(tokens)
            segments.append(segs)
        return mask_batch(examples, stream, self.corpus.vocab_size,
                          self.config.masking, segments)

    def sample(self, tag: TaskTag, stream: SeedStream) -> Batch:
        tag = TaskTag.parse(tag)
        if tag is TaskTag.MLM:
            return self._mlm(stream)
        if tag is TaskTag.NSP:
            return make_nsp_batch(self.corpus, stream,
                                  self.config.batch_size, self.config.max_len)
        if tag in PAIR_TAGS:
            return make_pair_task_batch(
                tag, self.corpus.generator, stream, self.config.batch_size,
                self.config.max_len, self.config.min_sentence,
                self.config.max_sentence)
        raise ConfigError('tasks.mix', f"{tag.value} is not a pre-training "
                          "task")


def sample_tags(mix: Mapping[Union[str, TaskTag], float], count: int,
                stream: SeedStream) -> List[TaskTag]:
    mix = parse_mix(mix)
    tags = list(mix)
    draws = stream.choice(len(tags), size=count,
                          p=np.array([mix[t] for t in tags]))
    return [tags[int(i)] for i in draws]


def sample_pretrain_batches(mix: Mapping[Union[str, TaskTag], float],
                            k_plus_1: int, stream: SeedStream,
                            sampler: PretrainSampler) -> List[Batch]:
    """draw the batches of one meta step

    Args:
        mix (Mapping[Union[str, TaskTag], float]): task probabilities
        k_plus_1 (int): number of batches, k meta-train plus one meta-test
        stream (SeedStream): randomness source for tags and contents
        sampler (PretrainSampler): batch factory

    Raises:
        ConfigError: invalid mix or count

    Returns:
        List[Batch]: i.i.d. draws; the last one is the meta-test batch
    """
    if k_plus_1 < 1:
        raise ConfigError('meta.k', "need at least the meta-test batch")
    return [sampler.sample(tag, stream)
            for tag in sample_tags(mix, k_plus_1, stream)]
