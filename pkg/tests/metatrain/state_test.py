import tempfile
import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import CheckpointError
from metaprep.metatrain import MetaConfig, MetaTrainer, OuterOptimizer, \
    QuadraticObjective, QuadraticSource, latest_step, read_checkpoint_meta, \
    restore_trainer_state, save_trainer_state
from metaprep.tasks import SeedStream, random_quadratic_task

stream = SeedStream(0, 'state-test')
TASKS = [random_quadratic_task(stream, 3) for _ in range(4)]


def trainer(k: int = 2, optimizer=OuterOptimizer.ADAM) -> MetaTrainer:
    config = MetaConfig(k=k, alpha=0.1, beta=0.05, outer_optimizer=optimizer,
                        total_meta_test_steps=6, seed=1)
    return MetaTrainer(config, QuadraticObjective(), QuadraticSource(TASKS),
                       ParamSet({'theta': np.ones(3)}))


class TestTrainerState(TestCase):
    def test_resume_replays(self):
        for optimizer in OuterOptimizer:
            reference = trainer(optimizer=optimizer)
            expected = reference.run()

            with tempfile.TemporaryDirectory() as tmp:
                first = trainer(optimizer=optimizer)
                first.run(until=2)
                save_trainer_state(first, tmp)
                self.assertEqual(latest_step(tmp), 2)

                resumed = trainer(optimizer=optimizer)
                self.assertEqual(restore_trainer_state(resumed, tmp), 2)
                reports = resumed.run()

            self.assertTrue(resumed.params.equals(reference.params))
            self.assertEqual(resumed.objective.evaluations,
                             reference.objective.evaluations)
            self.assertEqual([r.metrics() for r in reports],
                             [r.metrics() for r in expected[2:]])

    def test_meta_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            t = trainer()
            t.run(until=1)
            save_trainer_state(t, tmp)
            meta = read_checkpoint_meta(tmp, 1)
        self.assertEqual(meta['k'], 2)
        self.assertEqual(meta['evaluations'], 3)
        self.assertIsNone(meta['dropout_stream'])

    def test_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertIsNone(latest_step(tmp))
            with self.assertRaises(CheckpointError):
                restore_trainer_state(trainer(), tmp)
            t = trainer(k=2)
            t.run(until=1)
            save_trainer_state(t, tmp)
            with self.assertRaises(CheckpointError):
                restore_trainer_state(trainer(k=3), tmp)


if __name__ == '__main__':
    unittest.main()
