from typing import Optional, Tuple

from metaprep.errors import UnknownTaskError
from metaprep.tasks.batch import Batch, PAIR_TAGS, TaskTag, labelled_batch, \
    pack_pair
from metaprep.tasks.corpus import Corpus, MarkovGenerator, Sentence
from metaprep.tasks.stream import SeedStream


def make_nsp_pair(corpus: Corpus, stream: SeedStream,
                  p_next: float = 0.5) -> Tuple[Sentence, Sentence, int]:
    """draw a next-sentence-prediction example

    Args:
        corpus (Corpus): source documents, each with at least 2 sentences
        stream (SeedStream): randomness source
        p_next (float): probability that B is the actual next sentence

    Returns:
        Tuple[Sentence, Sentence, int]: sentence A, sentence B, label
            (1 when B follows A)
    """
    doc = corpus.documents[int(stream.integers(len(corpus.documents)))]
    i = int(stream.integers(len(doc) - 1))
    a = doc[i]
    if stream.random() < p_next:
        return a, doc[i + 1], 1
    other = corpus.documents[int(stream.integers(len(corpus.documents)))]
    return a, other[int(stream.integers(len(other)))], 0


def make_nsp_batch(corpus: Corpus, stream: SeedStream, batch_size: int,
                   max_len: int, p_next: float = 0.5) -> Batch:
    examples, labels = [], []
    for _ in range(batch_size):
        a, b, label = make_nsp_pair(corpus, stream, p_next)
        examples.append(pack_pair(a, b, max_len))
        labels.append(label)
    return labelled_batch(examples, labels, TaskTag.NSP)


def make_pair(task: TaskTag, generator: MarkovGenerator, stream: SeedStream,
              min_len: int, max_len: int,
              same_topic: Optional[bool] = None):
    """draw one synthetic matching pair

    Both sides come from the Markov generator; the label is 1 exactly when
    they share a topic. QA_MATCH answers continue the question's chain
    state, QQ_MATCH questions start fresh.
    """
    if task not in PAIR_TAGS:
        raise UnknownTaskError(f"not a pair-matching task: {task}")
    if same_topic is None:
        same_topic = bool(stream.random() < 0.5)

    topic_a = int(stream.integers(generator.n_topics))
    if same_topic:
        topic_b = topic_a
    else:
        offset = int(stream.integers(1, generator.n_topics))
        topic_b = (topic_a + offset) % generator.n_topics

    a = generator.sentence(topic_a, stream,
                           int(stream.integers(min_len, max_len + 1)))
    context = a if task is TaskTag.QA_MATCH else None
    b = generator.sentence(topic_b, stream,
                           int(stream.integers(min_len, max_len + 1)),
                           context)
    return a, b, int(same_topic)


def make_pair_task_batch(task: TaskTag, generator: MarkovGenerator,
                         stream: SeedStream, batch_size: int, max_len: int,
                         min_sentence: int = 4, max_sentence: int = 12,
                         same_topic: Optional[bool] = None) -> Batch:
    """batch of synthetic question-answer / question-question pairs

    Raises:
        UnknownTaskError: task is not QA_MATCH or QQ_MATCH

    Returns:
        Batch: packed like NSP, labels balanced in expectation
    """
    task = TaskTag.parse(task)
    examples, labels = [], []
    for _ in range(batch_size):
        a, b, label = make_pair(task, generator, stream, min_sentence,
                                max_sentence, same_topic)
        examples.append(pack_pair(a, b, max_len))
        labels.append(label)
    return labelled_batch(examples, labels, task)
