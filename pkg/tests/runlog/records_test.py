import tempfile
import unittest
from pathlib import Path
from unittest import TestCase

from metaprep.errors import EmptyLogError
from metaprep.runlog import Phase, RunLog, RunRecord


def record(step: int, run_id: str = 'pretrain/k=1', loss: float = 0.5):
    return RunRecord(run_id, step, Phase.PRETRAIN, {'test_loss': loss},
                     timestamp=1.0 + step)


class TestRunRecord(TestCase):
    def test_json(self):
        original = record(3)
        parsed = RunRecord.from_json(original.to_json())
        self.assertEqual(parsed, original)
        self.assertTrue(parsed.same_content(record(3)))
        self.assertFalse(parsed.same_content(record(3, loss=0.4)))


class TestRunLog(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.log = RunLog(Path(self.tmp.name) / 'runs' / 'metrics.jsonl')

    def tearDown(self):
        self.tmp.cleanup()

    def test_missing_file_is_empty(self):
        self.assertEqual(self.log.read(), [])
        self.assertIsNone(self.log.last_step('x', Phase.PRETRAIN))

    def test_append_and_read(self):
        self.log.extend(record(i) for i in range(1, 4))
        self.assertEqual([r.step for r in self.log], [1, 2, 3])
        self.assertEqual(self.log.last_step('pretrain/k=1', Phase.PRETRAIN),
                         3)

    def test_torn_tail(self):
        self.log.extend([record(1), record(2)])
        with self.log.path.open('a') as f:
            f.write('{"run_id": "pretrain/k=1", "st')
        with self.assertRaises(EmptyLogError):
            self.log.read()
        self.assertEqual(len(self.log.read(strict=False)), 2)

    def test_truncate_after(self):
        self.log.extend(record(i) for i in range(1, 6))
        self.log.append(record(9, run_id='pretrain/k=3'))
        removed = self.log.truncate_after('pretrain/k=1', Phase.PRETRAIN, 2)
        self.assertEqual(removed, 3)
        self.assertEqual([(r.run_id, r.step) for r in self.log.read()],
                         [('pretrain/k=1', 1), ('pretrain/k=1', 2),
                          ('pretrain/k=3', 9)])


if __name__ == '__main__':
    unittest.main()
