import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import Tensor
from metaprep.errors import ConfigError, InstabilityError
from metaprep.tasks import QuadraticTask, SeedStream, \
    quadratic_meta_gradient_oracle, random_quadratic_task


class TestQuadraticTask(TestCase):
    def test_loss_and_gradient(self):
        task = QuadraticTask([2.0, 1.0], [1.0, -1.0])
        theta = np.array([0.0, 1.0])
        self.assertAlmostEqual(float(task.loss(Tensor(theta)).item()), 3.0)
        np.testing.assert_allclose(task.gradient(theta), [-2.0, 2.0])

    def test_validation(self):
        with self.assertRaises(ConfigError):
            QuadraticTask([1.0, 0.0], [0.0, 0.0])
        with self.assertRaises(ConfigError):
            QuadraticTask([1.0], [0.0, 0.0])

    def test_random_task(self):
        task = random_quadratic_task(SeedStream(0), 5)
        self.assertEqual(task.dim, 5)
        self.assertTrue(np.all((task.curvature >= 0.5) &
                               (task.curvature <= 2.0)))


class TestOracle(TestCase):
    def test_scalar_value(self):
        task = QuadraticTask([1.0], [0.0])
        grad = quadratic_meta_gradient_oracle(task, np.array([1.0]), 0.1, 2)
        self.assertAlmostEqual(float(grad[0]), 0.6561, places=12)

    def test_depth_zero_is_plain_gradient(self):
        task = QuadraticTask([2.0, 0.5], [1.0, 3.0])
        theta = np.array([-1.0, 2.0])
        np.testing.assert_array_equal(
            quadratic_meta_gradient_oracle(task, theta, 0.3, 0),
            task.gradient(theta))

    def test_unstable(self):
        with self.assertRaises(InstabilityError):
            quadratic_meta_gradient_oracle(QuadraticTask([4.0], [0.0]),
                                           np.array([1.0]), 0.5, 3)


if __name__ == '__main__':
    unittest.main()
