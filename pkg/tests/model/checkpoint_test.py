import tempfile
import unittest
from pathlib import Path
from unittest import TestCase

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import CheckpointError
from metaprep.model import HEADER, ModelConfig, check_compatible, \
    decode_params, encode_params, init_params, load_params, save_params

CONFIG = ModelConfig(vocab_size=8, max_len=8, d_model=4, n_heads=2,
                     n_layers=1, d_ff=8)


class TestCheckpoint(TestCase):
    params = init_params(CONFIG, 0)

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'nested' / 'model.ckpt'
            save_params(self.params, path)
            self.assertTrue(load_params(path).equals(self.params))

    def test_layout(self):
        data = encode_params(ParamSet({'w': np.zeros((2, 3))}))
        self.assertTrue(data.startswith(HEADER))
        self.assertEqual(len(data), len(HEADER) + 4 + 4 + 1 + 4 + 16 + 48 + 8)

    def test_bad_header(self):
        data = encode_params(self.params)
        with self.assertRaises(CheckpointError):
            decode_params(b'X' + data[1:])

    def test_truncated(self):
        data = encode_params(self.params)
        with self.assertRaises(CheckpointError):
            decode_params(data[:-1])
        with self.assertRaises(CheckpointError):
            decode_params(data[:len(HEADER) + 2])

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_params('/nonexistent/model.ckpt')

    def test_compatibility(self):
        check_compatible(self.params, CONFIG)
        encoder_only = self.params.subset(lambda n: not n.startswith('heads'))
        check_compatible(encoder_only, CONFIG)
        with self.assertRaises(CheckpointError):
            check_compatible(self.params, ModelConfig(
                vocab_size=8, max_len=8, d_model=4, n_heads=2, n_layers=2,
                d_ff=8))
        with self.assertRaises(CheckpointError):
            check_compatible(self.params, ModelConfig(
                vocab_size=16, max_len=8, d_model=4, n_heads=2, n_layers=1,
                d_ff=8))


if __name__ == '__main__':
    unittest.main()
