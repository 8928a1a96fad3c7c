import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import Graph, ParamSet, Tensor
from metaprep.errors import ShapeError


def sample() -> ParamSet:
    return ParamSet({'w': np.arange(6.0).reshape(2, 3),
                     'b': np.array([0.5, -0.5])})


class TestParamSet(TestCase):
    def test_flatten_order(self):
        np.testing.assert_array_equal(sample().flatten(),
                                      [0, 1, 2, 3, 4, 5, 0.5, -0.5])

    def test_unflatten(self):
        params = sample()
        out = params.unflatten(np.arange(8.0))
        self.assertEqual(out.shapes(), params.shapes())
        np.testing.assert_array_equal(out['b'].values, [6.0, 7.0])
        self.assertGreater(out.version, params.version)
        with self.assertRaises(ShapeError):
            params.unflatten(np.zeros(7))

    def test_axpy(self):
        theta = ParamSet({'x': np.array([1.0, 1.0])})
        g = ParamSet({'x': np.array([2.0, 0.0])})
        np.testing.assert_array_equal(theta.axpy(-0.5, g)['x'].values,
                                      [0.0, 1.0])

    def test_axpy_incompatible(self):
        with self.assertRaises(ShapeError):
            sample().axpy(1.0, ParamSet({'w': np.zeros((2, 3))}))

    def test_never_mutates(self):
        params = sample()
        before = params.flatten().copy()
        params.add(params)
        params.scale(3.0)
        params.axpy(2.0, params)
        np.testing.assert_array_equal(params.flatten(), before)

    def test_copies_arrays(self):
        values = np.zeros(2)
        params = ParamSet({'x': values})
        values[0] = 1.0
        self.assertEqual(params['x'].values[0], 0.0)

    def test_track_stays_on_graph(self):
        graph = Graph()
        tracked = sample().track(graph)
        self.assertTrue(all(t.graph is graph for t in tracked.values()))
        moved = tracked.axpy(0.1, tracked)
        self.assertTrue(all(t.graph is graph for t in moved.values()))
        self.assertTrue(all(t.graph is None for t in moved.detach().values()))

    def test_subset_and_merge(self):
        params = sample()
        only_w = params.subset(lambda n: n == 'w')
        self.assertEqual(only_w.names(), ['w'])
        merged = only_w.merge(ParamSet({'w': np.ones((2, 3)),
                                        'c': np.zeros(1)}))
        self.assertEqual(merged.names(), ['w', 'c'])
        np.testing.assert_array_equal(merged['w'].values, np.ones((2, 3)))

    def test_equals_is_exact(self):
        params = sample()
        self.assertTrue(params.equals(sample()))
        nudged = params.map(lambda n, t: Tensor(t.values + 1e-15))
        self.assertFalse(params.equals(nudged))

    def test_norm_and_counts(self):
        params = ParamSet({'x': np.array([3.0, 4.0])})
        self.assertEqual(params.norm(), 5.0)
        self.assertEqual(params.num_parameters, 2)
        self.assertEqual(len(sample()), 2)


if __name__ == '__main__':
    unittest.main()
