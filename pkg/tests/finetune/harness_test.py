import unittest
from unittest import TestCase

import numpy as np

from metaprep.errors import CheckpointError
from metaprep.finetune import finetune, prepare_params, synth_downstream
from metaprep.model import DOWNSTREAM_HEAD, ModelConfig, init_params

from tests.golden import assert_golden

MODEL = ModelConfig(vocab_size=16, max_len=16, d_model=8, n_heads=2,
                    n_layers=1, d_ff=16)
SMALL = dict(sizes=(32, 32, 32), vocab_size=16, n_topics=4, max_len=16,
             min_sentence=2, max_sentence=4)


class TestFinetune(TestCase):
    init = init_params(MODEL, 0)
    task = synth_downstream('SINGLE_SENTENCE_CLS', 0, **SMALL)

    def test_zero_epochs(self):
        records = finetune(self.init, self.task, epochs=0,
                           model_config=MODEL)
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0].epoch, 0)
        self.assertTrue(0.0 <= records[0].test_accuracy <= 1.0)

    def test_zero_learning_rate(self):
        records = finetune(self.init, self.task, epochs=2, lr=0.0,
                           model_config=MODEL)
        self.assertEqual([r.epoch for r in records], [0, 1, 2])
        self.assertEqual(len({r.dev_accuracy for r in records}), 1)
        self.assertEqual(len({r.test_accuracy for r in records}), 1)

    def test_init_untouched(self):
        before = self.init.flatten().copy()
        finetune(self.init, self.task, epochs=1, model_config=MODEL)
        np.testing.assert_array_equal(self.init.flatten(), before)

    def test_deterministic(self):
        a = finetune(self.init, self.task, epochs=1, seed=4,
                     model_config=MODEL)
        b = finetune(self.init, self.task, epochs=1, seed=4,
                     model_config=MODEL)
        self.assertEqual([r.metrics() for r in a], [r.metrics() for r in b])

    def test_recorded_trajectory(self):
        records = finetune(self.init, self.task, epochs=2, seed=4,
                           model_config=MODEL)
        assert_golden(self, 'finetune_single_sentence_seed4',
                      {'epochs': [r.metrics() for r in records]})

    def test_training_moves_params(self):
        frozen = finetune(self.init, self.task, epochs=2, lr=0.0,
                          model_config=MODEL)
        trained = finetune(self.init, self.task, epochs=2, lr=1e-2,
                           model_config=MODEL)
        self.assertTrue(all(np.isfinite(r.train_loss) for r in trained))
        self.assertEqual(trained[0].metrics(), frozen[0].metrics())
        self.assertNotEqual(trained[2].train_loss, frozen[2].train_loss)

    def test_cloze(self):
        task = synth_downstream('CLOZE', 0, **SMALL)
        records = finetune(self.init, task, epochs=1, model_config=MODEL)
        self.assertEqual(len(records), 2)

    def test_prepare_params(self):
        params = prepare_params(self.init, self.task, MODEL, 0)
        self.assertNotIn('heads.nsp.weight', params)
        self.assertEqual(params[f"{DOWNSTREAM_HEAD}.weight"].shape, (8, 2))
        cloze = prepare_params(self.init, synth_downstream('CLOZE', 0,
                                                           **SMALL),
                               MODEL, 0)
        self.assertNotIn(f"{DOWNSTREAM_HEAD}.weight", cloze)
        self.assertEqual(cloze[f"{DOWNSTREAM_HEAD}.bias"].shape, (4,))

    def test_incompatible_init(self):
        other = ModelConfig(vocab_size=16, max_len=16, d_model=8, n_heads=2,
                            n_layers=2, d_ff=16)
        with self.assertRaises(CheckpointError):
            finetune(self.init, self.task, epochs=1, model_config=other)


if __name__ == '__main__':
    unittest.main()
