import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import ParamSet, relative_error
from metaprep.errors import GradError, NonFiniteError
from metaprep.metatrain import GradMode, QuadraticObjective, \
    compute_meta_gradient, inner_loop, meta_gradient_first_order, \
    meta_gradient_full
from metaprep.tasks import QuadraticTask, SeedStream, \
    quadratic_meta_gradient_oracle, random_quadratic_task


def theta(*values) -> ParamSet:
    return ParamSet({'theta': np.array(values, dtype=np.float64)})


UNIT = QuadraticTask([1.0], [0.0])


class TestInnerLoop(TestCase):
    def test_contraction(self):
        adapted = inner_loop(theta(1.0), [UNIT] * 3, 0.1,
                             QuadraticObjective())
        self.assertAlmostEqual(adapted.theta_k['theta'].item(), 0.729,
                               places=14)
        self.assertEqual(len(adapted.trajectory), 4)
        self.assertEqual(len(adapted.losses), 3)
        self.assertAlmostEqual(adapted.losses[0], 0.5)

    def test_zero_step_size(self):
        start = theta(0.3, -0.2)
        task = QuadraticTask([1.0, 2.0], [0.0, 0.0])
        adapted = inner_loop(start, [task] * 4, 0.0, QuadraticObjective())
        np.testing.assert_array_equal(adapted.theta_k['theta'].values,
                                      start['theta'].values)

    def test_non_finite(self):
        broken = QuadraticTask([1.0], [np.inf])
        with self.assertRaises(NonFiniteError) as ctx:
            inner_loop(theta(1.0), [UNIT, broken], 0.1, QuadraticObjective())
        self.assertEqual(ctx.exception.step, 2)


class TestMetaGradient(TestCase):
    def test_full_matches_oracle(self):
        stream = SeedStream(0)
        for _ in range(5):
            task = random_quadratic_task(stream, 4)
            start = theta(*stream.normal(size=4))
            for k in (0, 1, 3, 6):
                got = meta_gradient_full(start, [task] * k, task, 0.3,
                                         QuadraticObjective(), k=k)
                want = quadratic_meta_gradient_oracle(
                    task, start['theta'].values, 0.3, k)
                self.assertLessEqual(
                    relative_error(got['theta'].values, want), 1e-10)

    def test_first_order_ratio(self):
        objective = QuadraticObjective()
        full = meta_gradient_full(theta(1.0), [UNIT] * 2, UNIT, 0.1,
                                  objective)
        first = meta_gradient_first_order(theta(1.0), [UNIT] * 2, UNIT, 0.1,
                                          objective)
        self.assertAlmostEqual(full['theta'].item() / first['theta'].item(),
                               0.81, places=12)

    def test_depth_zero_modes_agree(self):
        task = QuadraticTask([1.5, 0.5], [1.0, -1.0])
        start = theta(0.2, 0.4)
        full = meta_gradient_full(start, [], task, 0.1, QuadraticObjective())
        first = meta_gradient_first_order(start, [], task, 0.1,
                                          QuadraticObjective())
        self.assertTrue(full.equals(first))
        np.testing.assert_allclose(full['theta'].values,
                                   task.gradient(start['theta'].values),
                                   rtol=1e-14)

    def test_depth_mismatch(self):
        with self.assertRaises(GradError):
            meta_gradient_full(theta(1.0), [UNIT], UNIT, 0.1,
                               QuadraticObjective(), k=2)
        with self.assertRaises(GradError):
            meta_gradient_first_order(theta(1.0), [UNIT], UNIT, 0.1,
                                      QuadraticObjective(), k=0)

    def test_evaluation_count(self):
        for mode in GradMode:
            objective = QuadraticObjective()
            result = compute_meta_gradient(mode, theta(1.0), [UNIT] * 3,
                                           UNIT, 0.1, objective)
            self.assertEqual(objective.evaluations, 4)
            self.assertEqual(len(result.inner_losses), 3)

    def test_start_not_mutated(self):
        start = theta(1.0)
        meta_gradient_full(start, [UNIT] * 2, UNIT, 0.1, QuadraticObjective())
        self.assertEqual(start['theta'].item(), 1.0)
        self.assertFalse(start['theta'].requires_grad)


if __name__ == '__main__':
    unittest.main()
