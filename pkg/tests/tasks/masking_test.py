import unittest
from unittest import TestCase

import numpy as np

from metaprep.errors import ConfigError, DegenerateBatchError
from metaprep.tasks import CLS, MASK, SEP, MaskingScheme, SeedStream, \
    mask_batch, mask_example

from tests.golden import assert_golden


class TestMasking(TestCase):
    def test_statistics(self):
        stream = SeedStream(0).child('masking')
        rng = np.random.default_rng(0)
        selected = masked = kept = total = 0
        for _ in range(1000):
            tokens = rng.integers(4, 64, 100)
            corrupted, positions, targets = mask_example(tokens, stream, 64)
            total += len(tokens)
            selected += len(positions)
            masked += int(np.sum(corrupted[positions] == MASK))
            kept += int(np.sum(corrupted[positions] == targets))
        self.assertAlmostEqual(selected / total, 0.15, delta=0.01)
        self.assertAlmostEqual(masked / selected, 0.8, delta=0.01)
        self.assertAlmostEqual(kept / selected, 0.1, delta=0.01)
        self.assertAlmostEqual((selected - masked - kept) / selected, 0.1,
                               delta=0.01)

    def test_targets_are_original_ids(self):
        tokens = [CLS, 10, 11, 12, 13, SEP]
        corrupted, positions, targets = mask_example(
            tokens, SeedStream(4), 32)
        np.testing.assert_array_equal(targets, np.array(tokens)[positions])
        untouched = np.setdiff1d(np.arange(len(tokens)), positions)
        np.testing.assert_array_equal(corrupted[untouched],
                                      np.array(tokens)[untouched])

    def test_structure_tokens_never_selected(self):
        stream = SeedStream(9)
        for _ in range(50):
            _, positions, _ = mask_example([CLS, 7, SEP, 8, SEP], stream, 16)
            self.assertTrue(set(positions) <= {1, 3})

    def test_select_all_keep_all(self):
        scheme = MaskingScheme(select=1.0, mask=0.0, random=0.0)
        tokens = [CLS, 5, 6, 7, SEP]
        corrupted, positions, _ = mask_example(tokens, SeedStream(1), 16,
                                               scheme)
        np.testing.assert_array_equal(corrupted, tokens)
        np.testing.assert_array_equal(positions, [1, 2, 3])

    def test_forces_one_selection(self):
        scheme = MaskingScheme(select=0.0)
        _, positions, _ = mask_example([CLS, 5, 6, SEP], SeedStream(2), 16,
                                       scheme)
        self.assertEqual(len(positions), 1)

    def test_no_maskable_token(self):
        with self.assertRaises(DegenerateBatchError):
            mask_example([CLS, SEP], SeedStream(0), 16)

    def test_mask_everything(self):
        scheme = MaskingScheme(select=1.0, mask=1.0, random=0.0)
        batch = mask_batch([[CLS, 5, 6, 7, SEP], [CLS, 9, SEP, 10, SEP]],
                           SeedStream(5), 32, scheme,
                           segments=[[0] * 5, [0, 0, 0, 1, 1]])
        np.testing.assert_array_equal(
            batch.tokens, [[CLS, MASK, MASK, MASK, SEP],
                           [CLS, MASK, SEP, MASK, SEP]])
        np.testing.assert_array_equal(batch.segments,
                                      [[0, 0, 0, 0, 0], [0, 0, 0, 1, 1]])
        np.testing.assert_array_equal(batch.mask_positions[0], [1, 2, 3])
        np.testing.assert_array_equal(batch.mask_positions[1], [1, 3])
        np.testing.assert_array_equal(batch.mask_targets[0], [5, 6, 7])
        np.testing.assert_array_equal(batch.mask_targets[1], [9, 10])

    def test_recorded_batch(self):
        examples = [[CLS, 5, 6, 7, 8, 9, 10, 11, 12, 13, SEP]] * 3
        batch = mask_batch(examples, SeedStream(5), 32)
        assert_golden(self, 'mask_batch_seed5', {
            'tokens': batch.tokens,
            'positions': batch.mask_positions,
            'targets': batch.mask_targets,
        })

    def test_invalid_scheme(self):
        with self.assertRaises(ConfigError):
            MaskingScheme(mask=0.9, random=0.2)


if __name__ == '__main__':
    unittest.main()
