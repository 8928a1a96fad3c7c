import unittest
from unittest import TestCase

import numpy as np

from metaprep.errors import UnknownTaskError
from metaprep.tasks import CLS, SEP, Corpus, SeedStream, TaskTag, \
    generate_corpus, make_nsp_batch, make_nsp_pair, make_pair, \
    make_pair_task_batch

from tests.golden import assert_golden


class TestNextSentencePairs(TestCase):
    def test_positive_rate(self):
        corpus = generate_corpus(0, 100, 64)
        stream = SeedStream(1).child('nsp')
        labels = [make_nsp_pair(corpus, stream)[2] for _ in range(10000)]
        self.assertAlmostEqual(float(np.mean(labels)), 0.5, delta=0.02)

    def test_forced_positive(self):
        corpus = Corpus([[[4, 5], [6, 7]]], 16)
        a, b, label = make_nsp_pair(corpus, SeedStream(0), p_next=1.0)
        self.assertEqual((a, b, label), ([4, 5], [6, 7], 1))

    def test_batch(self):
        corpus = generate_corpus(0, 20, 64)
        batch = make_nsp_batch(corpus, SeedStream(3), 4, 32)
        self.assertIs(batch.task_tag, TaskTag.NSP)
        self.assertEqual(batch.size, 4)

    def test_fixed_corpus_batch(self):
        corpus = Corpus([[[4, 5], [6, 7, 8]]], 16)
        batch = make_nsp_batch(corpus, SeedStream(3), 2, 32, p_next=1.0)
        np.testing.assert_array_equal(
            batch.tokens, [[CLS, 4, 5, SEP, 6, 7, 8, SEP]] * 2)
        np.testing.assert_array_equal(batch.segments,
                                      [[0, 0, 0, 0, 1, 1, 1, 1]] * 2)
        np.testing.assert_array_equal(batch.attention_mask, np.ones((2, 8)))
        np.testing.assert_array_equal(batch.labels, [1, 1])

    def test_recorded_batch(self):
        corpus = generate_corpus(0, 20, 64)
        batch = make_nsp_batch(corpus, SeedStream(3), 4, 32)
        assert_golden(self, 'nsp_batch_seed3', {
            'tokens': batch.tokens,
            'segments': batch.segments,
            'labels': batch.labels,
        })


class TestMatchingPairs(TestCase):
    generator = generate_corpus(0, 10, 64).generator

    def test_balance(self):
        stream = SeedStream(4).child('pairs')
        labels = [make_pair(TaskTag.QQ_MATCH, self.generator, stream, 2, 4)[2]
                  for _ in range(10000)]
        self.assertAlmostEqual(float(np.mean(labels)), 0.5, delta=0.02)

    def test_forced_same_topic(self):
        batch = make_pair_task_batch(TaskTag.QA_MATCH, self.generator,
                                     SeedStream(0), 8, 32, same_topic=True)
        np.testing.assert_array_equal(batch.labels, np.ones(8))

    def test_recorded_batch(self):
        batch = make_pair_task_batch(TaskTag.QA_MATCH, self.generator,
                                     SeedStream(0), 4, 32)
        assert_golden(self, 'qa_match_batch_seed0', {
            'tokens': batch.tokens,
            'segments': batch.segments,
            'labels': batch.labels,
        })

    def test_unknown_task(self):
        with self.assertRaises(UnknownTaskError):
            make_pair_task_batch(TaskTag.NSP, self.generator, SeedStream(0),
                                 2, 32)


if __name__ == '__main__':
    unittest.main()
