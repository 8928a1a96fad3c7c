from __future__ import annotations
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from metaprep.errors import ConfigError
from metaprep.tasks.stream import SeedStream

logger = logging.getLogger(__name__)

PAD = 0
CLS = 1
SEP = 2
MASK = 3
FIRST_CONTENT = 4

Sentence = List[int]
Document = List[Sentence]


@dataclass(frozen=True)
class CorpusSpec:
    """Seeded grammar parameters of the synthetic corpus"""

    seed: int
    n_docs: int
    vocab_size: int
    n_topics: int = 6
    min_sentences: int = 2
    max_sentences: int = 6
    min_len: int = 4
    max_len: int = 12
    topic_strength: float = 2.5

    def __post_init__(self):
        if self.vocab_size < 8:
            raise ConfigError('vocab_size',
                              f"vocab too small ({self.vocab_size} < 8)")
        if not 2 <= self.n_topics <= self.vocab_size - FIRST_CONTENT:
            raise ConfigError('n_topics',
                              f"invalid topic count {self.n_topics}")
        if self.min_sentences < 2 or self.max_sentences < self.min_sentences:
            raise ConfigError('min_sentences',
                              "documents need at least 2 sentences")
        if self.min_len < 2 or self.max_len < self.min_len:
            raise ConfigError('min_len', "sentences need at least 2 tokens")
        if self.n_docs < 1:
            raise ConfigError('n_docs', "corpus needs at least one document")


class MarkovGenerator:
    """Order-2 Markov chain over content tokens with topic biases.

    The next-token logits are P1[b] + P2[a] / 2 + bias[topic] given the two
    previous tokens (a, b). Each topic boosts its own slice of the content
    vocabulary, which is what makes same-topic text recognizable.
    """

    def __init__(self, vocab_size: int, n_topics: int, seed: int,
                 topic_strength: float = 2.5):
        self.vocab_size = vocab_size
        self.n_topics = n_topics
        self.n_content = vocab_size - FIRST_CONTENT

        stream = SeedStream(seed, 'markov')
        self.first_order = stream.normal(size=(self.n_content, self.n_content))
        self.second_order = stream.normal(
            size=(self.n_content, self.n_content))

        order = stream.permutation(self.n_content)
        self.topic_of_token = np.zeros(self.n_content, dtype=np.int64)
        for topic, chunk in enumerate(np.array_split(order, n_topics)):
            self.topic_of_token[chunk] = topic
        self.topic_bias = np.zeros((n_topics, self.n_content))
        self.topic_bias[self.topic_of_token,
                        np.arange(self.n_content)] = topic_strength

    @classmethod
    def from_spec(cls, spec: CorpusSpec) -> MarkovGenerator:
        return cls(spec.vocab_size, spec.n_topics, spec.seed,
                   spec.topic_strength)

    def _draw(self, logits: np.ndarray, stream: SeedStream) -> int:
        weights = np.exp(logits - np.max(logits))
        cdf = np.cumsum(weights)
        index = int(np.searchsorted(cdf, stream.random() * cdf[-1],
                                    side='right'))
        return min(index, self.n_content - 1)

    def sentence(self, topic: int, stream: SeedStream, length: int,
                 context: Optional[Sequence[int]] = None) -> Sentence:
        """generate one sentence

        Args:
            topic (int): topic whose bias is applied
            stream (SeedStream): randomness source
            length (int): number of tokens
            context (Optional[Sequence[int]]): previous tokens (token ids);
                the last two seed the chain, otherwise they are drawn from
                the topic's unigram

        Returns:
            Sentence: content token ids
        """
        bias = self.topic_bias[topic]
        if context is not None and len(context) >= 2:
            a, b = (int(t) - FIRST_CONTENT for t in context[-2:])
        else:
            a = self._draw(bias, stream)
            b = self._draw(bias, stream)

        out = []
        for _ in range(length):
            logits = self.first_order[b] + 0.5 * self.second_order[a] + bias
            a, b = b, self._draw(logits, stream)
            out.append(b + FIRST_CONTENT)
        return out

    def document(self, topic: int, stream: SeedStream, n_sentences: int,
                 min_len: int, max_len: int) -> Document:
        doc = []
        context = None
        for _ in range(n_sentences):
            length = int(stream.integers(min_len, max_len + 1))
            sentence = self.sentence(topic, stream, length, context)
            doc.append(sentence)
            context = sentence
        return doc


@dataclass
class Corpus:
    documents: List[Document]
    vocab_size: int
    generator_spec: Optional[CorpusSpec] = None
    topics: List[int] = field(default_factory=list)

    def __post_init__(self):
        for i, doc in enumerate(self.documents):
            if len(doc) < 2:
                raise ConfigError('documents',
                                  f"document {i} has fewer than 2 sentences")
            for sentence in doc:
                if not sentence:
                    raise ConfigError('documents',
                                      f"document {i} has an empty sentence")
                if min(sentence) < FIRST_CONTENT or \
                        max(sentence) >= self.vocab_size:
                    raise ConfigError(
                        'documents',
                        f"document {i} holds ids outside "
                        f"[{FIRST_CONTENT}, {self.vocab_size})")

    @cached_property
    def generator(self) -> MarkovGenerator:
        if self.generator_spec is None:
            raise ConfigError('generator_spec',
                              "corpus was imported without a generator")
        return MarkovGenerator.from_spec(self.generator_spec)

    @property
    def n_sentences(self) -> int:
        return sum(len(doc) for doc in self.documents)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for doc in self.documents for s in doc)


def generate_corpus(seed: int, n_docs: int, vocab_size: int,
                    **grammar) -> Corpus:
    """generate a topic-biased Markov corpus

    Args:
        seed (int): seed for both the grammar and the sampled documents
        n_docs (int): number of documents
        vocab_size (int): vocabulary size including the 4 reserved ids
        **grammar: remaining CorpusSpec fields

    Raises:
        ConfigError: vocab too small or invalid grammar parameters

    Returns:
        Corpus: deterministic for a given seed
    """
    spec = CorpusSpec(seed=seed, n_docs=n_docs, vocab_size=vocab_size,
                      **grammar)
    generator = MarkovGenerator.from_spec(spec)
    stream = SeedStream(seed, 'corpus')

    documents, topics = [], []
    for _ in range(n_docs):
        topic = int(stream.integers(spec.n_topics))
        n_sentences = int(stream.integers(spec.min_sentences,
                                          spec.max_sentences + 1))
        documents.append(generator.document(
            topic, stream, n_sentences, spec.min_len, spec.max_len))
        topics.append(topic)

    corpus = Corpus(documents, vocab_size, spec, topics)
    corpus.__dict__['generator'] = generator
    logger.debug("generated corpus: %d docs, %d tokens",
                 n_docs, corpus.n_tokens)
    return corpus


def export_corpus(corpus: Corpus, path: Union[str, Path]):
    """one sentence per line, blank line between documents"""
    blocks = ['\n'.join(' '.join(str(t) for t in s) for s in doc)
              for doc in corpus.documents]
    Path(path).write_text('\n\n'.join(blocks) + '\n')


def import_corpus(path: Union[str, Path], vocab_size: int) -> Corpus:
    documents: List[Document] = []
    current: Document = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            if current:
                documents.append(current)
                current = []
            continue
        current.append([int(t) for t in line.split()])
    if current:
        documents.append(current)
    return Corpus(documents, vocab_size)
