import unittest
from unittest import TestCase

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import NonFiniteError
from metaprep.metatrain import GradMode, MetaConfig, MetaTrainer, \
    MixtureSource, OuterOptimizer, QuadraticObjective, QuadraticSource, \
    TransformerObjective, build_trainer, multitask_train
from metaprep.model import ModelConfig, init_params
from metaprep.tasks import PretrainSampler, QuadraticTask, SamplerConfig

MODEL = ModelConfig(vocab_size=8, max_len=8, d_model=4, n_heads=2,
                    n_layers=1, d_ff=8, dropout_rate=0.0)
DATA = SamplerConfig(batch_size=2, max_len=8, n_docs=8, n_topics=2,
                     min_sentence=2, max_sentence=2)
MIX = {'MLM': 0.25, 'NSP': 0.25, 'QA_MATCH': 0.25, 'QQ_MATCH': 0.25}
TASK = QuadraticTask([1.0, 2.0], [0.5, -1.5])


def quadratic_trainer(k: int, steps: int = 10, **overrides) -> MetaTrainer:
    config = MetaConfig(k=k, alpha=0.1, beta=0.1,
                        outer_optimizer=OuterOptimizer.SGD,
                        total_meta_test_steps=steps, **overrides)
    return MetaTrainer(config, QuadraticObjective(), QuadraticSource([TASK]),
                       ParamSet({'theta': np.zeros(2)}))


class TestMetaTrainer(TestCase):
    def test_depth_zero_is_multitask_training(self):
        config = MetaConfig(k=0, alpha=0.1, beta=0.05,
                            outer_optimizer=OuterOptimizer.SGD,
                            total_meta_test_steps=5, seed=3)
        sampler = PretrainSampler.from_config(DATA, MODEL.vocab_size)
        init = init_params(MODEL, 0)
        trainer = MetaTrainer(config, TransformerObjective(MODEL),
                              MixtureSource(MIX, sampler), init)
        trainer.run()
        reference = multitask_train(init, TransformerObjective(MODEL),
                                    MixtureSource(MIX, sampler), 0.05, 5,
                                    seed=3)
        self.assertTrue(trainer.params.equals(reference[-1]))

    def test_evaluation_budget(self):
        for k in (0, 2, 4):
            trainer = quadratic_trainer(k, steps=5)
            trainer.run()
            self.assertEqual(trainer.objective.evaluations, 5 * (k + 1))
            self.assertEqual(trainer.config.evaluations_per_step, k + 1)

    def test_converges_on_single_task(self):
        for mode in GradMode:
            trainer = quadratic_trainer(1, steps=400, grad_mode=mode)
            trainer.run()
            np.testing.assert_allclose(trainer.params['theta'].values,
                                       TASK.center, atol=1e-6)

    def test_distance_shrinks_every_step(self):
        # per coordinate the offset scales by 1 - beta h (1 - alpha h)^(2k)
        # in full mode and 1 - beta h (1 - alpha h)^k in first order
        for mode, power in ((GradMode.FULL, 2), (GradMode.FIRST_ORDER, 1)):
            for k in (0, 1, 3):
                trainer = quadratic_trainer(k, grad_mode=mode)
                factor = 1 - 0.1 * TASK.curvature * \
                    (1 - 0.1 * TASK.curvature) ** (power * k)
                offset = trainer.params['theta'].values - TASK.center
                for _ in range(10):
                    trainer.step()
                    moved = trainer.params['theta'].values - TASK.center
                    self.assertLess(np.linalg.norm(moved),
                                    np.linalg.norm(offset))
                    np.testing.assert_allclose(moved, factor * offset,
                                               rtol=1e-12)
                    offset = moved

    def test_reports(self):
        seen = []
        trainer = quadratic_trainer(2, steps=3)
        reports = trainer.run(on_step=lambda t, r: seen.append(r.step))
        self.assertEqual(seen, [1, 2, 3])
        self.assertEqual(len(reports[0].inner_losses), 2)
        self.assertEqual(reports[0].tags, ['QUADRATIC'] * 3)
        metrics = reports[0].metrics()
        self.assertNotIn('wallclock', metrics)
        self.assertIn('inner_loss_2', metrics)
        self.assertEqual(metrics['loss_QUADRATIC'], reports[0].test_loss)

    def test_run_until(self):
        trainer = quadratic_trainer(1, steps=10)
        trainer.run(until=4)
        self.assertEqual(trainer.step_count, 4)
        trainer.run()
        self.assertEqual(trainer.step_count, 10)

    def test_deterministic(self):
        a = build_trainer(MetaConfig(k=1, alpha=0.1, beta=0.01,
                                     total_meta_test_steps=3), MIX, MODEL, 0,
                          DATA)
        b = build_trainer(MetaConfig(k=1, alpha=0.1, beta=0.01,
                                     total_meta_test_steps=3), MIX, MODEL, 0,
                          DATA)
        ra, rb = a.run(), b.run()
        self.assertTrue(a.params.equals(b.params))
        self.assertEqual([r.metrics() for r in ra], [r.metrics() for r in rb])

    def test_non_finite(self):
        config = MetaConfig(k=1, alpha=0.1, beta=0.1)
        trainer = MetaTrainer(config, QuadraticObjective(),
                              QuadraticSource([QuadraticTask([1.0],
                                                             [np.inf])]),
                              ParamSet({'theta': np.zeros(1)}))
        with self.assertRaises(NonFiniteError) as ctx:
            trainer.step()
        self.assertEqual(ctx.exception.step, 1)


if __name__ == '__main__':
    unittest.main()
