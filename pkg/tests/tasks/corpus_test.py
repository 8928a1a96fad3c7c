import unittest
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest import TestCase

import numpy as np

from metaprep.errors import ConfigError
from metaprep.tasks import FIRST_CONTENT, Corpus, SeedStream, \
    export_corpus, generate_corpus, import_corpus, make_nsp_pair


def overlap(a, b) -> float:
    seen = set(a)
    return sum(t in seen for t in b) / len(b)


class TestCorpus(TestCase):
    def test_deterministic(self):
        a = generate_corpus(5, 20, 64)
        b = generate_corpus(5, 20, 64)
        self.assertEqual(a.documents, b.documents)
        self.assertNotEqual(a.documents, generate_corpus(6, 20, 64).documents)

    def test_no_reserved_ids(self):
        corpus = generate_corpus(0, 50, 32)
        tokens = [t for doc in corpus.documents for s in doc for t in s]
        self.assertGreaterEqual(min(tokens), FIRST_CONTENT)
        self.assertLess(max(tokens), 32)
        self.assertTrue(all(len(doc) >= 2 for doc in corpus.documents))

    def test_vocab_too_small(self):
        with self.assertRaises(ConfigError):
            generate_corpus(0, 5, 7)

    def test_rejects_short_documents(self):
        with self.assertRaises(ConfigError):
            Corpus([[[4, 5, 6]]], 16)

    def test_export_import(self):
        corpus = generate_corpus(1, 10, 40)
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / 'corpus.txt'
            export_corpus(corpus, path)
            loaded = import_corpus(path, 40)
        self.assertEqual(loaded.documents, corpus.documents)

    def test_topic_overlap_predicts_next_sentence(self):
        # an overlap threshold fitted on half the pairs must beat chance on
        # the other half
        corpus = generate_corpus(0, 200, 64)
        stream = SeedStream(2).child('overlap')
        features, labels = [], []
        for _ in range(10000):
            a, b, label = make_nsp_pair(corpus, stream)
            features.append(overlap(a, b))
            labels.append(label)
        features, labels = np.array(features), np.array(labels)
        train, held = slice(0, 5000), slice(5000, None)

        def accuracy(split, threshold):
            return float(np.mean((features[split] > threshold) ==
                                 labels[split]))
        best = max(np.unique(features[train]),
                   key=lambda t: accuracy(train, t))
        self.assertGreater(accuracy(held, best), 0.6)


if __name__ == '__main__':
    unittest.main()
