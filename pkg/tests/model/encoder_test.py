import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import IdRangeError, ShapeError
from metaprep.model import INIT_STD, ModelConfig, encode, init_params

CONFIG = ModelConfig(vocab_size=16, max_len=8, d_model=8, n_heads=2,
                     n_layers=2, d_ff=16)


def layer_norm(x, eps=1e-12):
    centered = x - x.mean(axis=-1, keepdims=True)
    return centered / np.sqrt(centered.var(axis=-1, keepdims=True) + eps)


def run(params, tokens, mask=None, segments=None):
    tokens = np.asarray(tokens)
    if mask is None:
        mask = np.ones_like(tokens)
    if segments is None:
        segments = np.zeros_like(tokens)
    return encode(params, tokens, segments, mask, CONFIG)


class TestInit(TestCase):
    def test_deterministic(self):
        self.assertTrue(init_params(CONFIG, 3).equals(init_params(CONFIG, 3)))
        self.assertFalse(init_params(CONFIG, 3).equals(init_params(CONFIG, 4)))

    def test_values(self):
        params = init_params(CONFIG, 0)
        for name, tensor in params.items():
            if name.endswith('.bias'):
                self.assertFalse(tensor.values.any(), name)
            elif name.endswith('.gain'):
                self.assertTrue(np.all(tensor.values == 1.0), name)
            else:
                self.assertLessEqual(np.abs(tensor.values).max(),
                                     2 * INIT_STD, name)
        self.assertEqual(params.shapes(), dict(CONFIG.parameter_shapes()))


class TestEncode(TestCase):
    params = init_params(CONFIG, 0)

    def test_shapes(self):
        out = run(self.params, [[1, 5, 6, 2], [1, 7, 2, 0]])
        self.assertEqual(out.token_states.shape, (2, 4, 8))
        self.assertEqual(out.pooled.shape, (2, 8))
        self.assertEqual(len(out.attention), 2)
        self.assertTrue(out.is_finite())

    def test_single_token_attention(self):
        out = run(self.params, [[1], [9]])
        for probs in out.attention:
            np.testing.assert_array_equal(probs.values, np.ones((2, 2, 1, 1)))

    def test_batch_permutation(self):
        a = run(self.params, [[1, 5, 6, 2], [1, 7, 8, 2]])
        b = run(self.params, [[1, 7, 8, 2], [1, 5, 6, 2]])
        np.testing.assert_allclose(a.token_states.values[::-1],
                                   b.token_states.values, atol=1e-12)

    def test_padding_ignored(self):
        alone = run(self.params, [[1, 5, 6, 2]])
        padded = run(self.params, [[1, 5, 6, 2, 0, 0], [1, 7, 8, 9, 10, 2]],
                     mask=[[1, 1, 1, 1, 0, 0], [1] * 6])
        np.testing.assert_allclose(padded.token_states.values[0, :4],
                                   alone.token_states.values[0], atol=1e-12)

    def test_dropout_off_is_deterministic(self):
        a = run(self.params, [[1, 5, 6, 2]])
        b = run(self.params, [[1, 5, 6, 2]])
        np.testing.assert_array_equal(a.pooled.values, b.pooled.values)

    def test_zeroed_layers_by_hand(self):
        # attention and feed-forward contribute nothing, leaving five
        # unit-gain layer norms over the embedding sum
        params = ParamSet({
            n: t.values if n.endswith('.gain') or n.startswith('embeddings')
            or n.startswith('heads') else np.zeros(t.shape)
            for n, t in self.params.items()})
        tokens, segments = np.array([[1, 9]]), np.array([[0, 1]])
        out = run(params, tokens, segments=segments)

        x = (params['embeddings.token'].values[tokens[0]] +
             params['embeddings.position'].values[:2] +
             params['embeddings.segment'].values[segments[0]])
        for _ in range(1 + 2 * CONFIG.n_layers):
            x = layer_norm(x)
        np.testing.assert_allclose(out.token_states.values[0], x,
                                   rtol=0, atol=1e-12)
        np.testing.assert_array_equal(out.pooled.values, np.zeros((1, 8)))

    def test_errors(self):
        with self.assertRaises(IdRangeError):
            run(self.params, [[1, 16]])
        with self.assertRaises(IdRangeError):
            run(self.params, [[1, 5]], segments=[[0, 2]])
        with self.assertRaises(ShapeError):
            run(self.params, [[1] * 9])
        with self.assertRaises(ShapeError):
            run(self.params, [[1, 5]], mask=[[1, 1, 1]])


if __name__ == '__main__':
    unittest.main()
