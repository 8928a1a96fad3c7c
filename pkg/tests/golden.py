"""Recorded outputs of seeded generators.

Each golden file under ``tests/goldens`` freezes what one seeded call
produced. A missing file is written and the test skipped; every later run
compares against it. Set METAPREP_UPDATE_GOLDEN=1 to re-record after an
intended change to a generator.
"""
import json
import math
import os
from pathlib import Path
from typing import Any, Dict
from unittest import TestCase

import numpy as np

GOLDEN_DIR = Path(__file__).parent / 'goldens'
UPDATE_ENV = 'METAPREP_UPDATE_GOLDEN'
RTOL = 1e-9


def plain(value: Any) -> Any:
    """numpy values and containers as JSON types"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    return value


def _compare(test: TestCase, actual: Any, expected: Any, where: str):
    if isinstance(expected, dict):
        test.assertEqual(sorted(actual), sorted(expected), where)
        for key in expected:
            _compare(test, actual[key], expected[key], f"{where}.{key}")
    elif isinstance(expected, list):
        test.assertIsInstance(actual, list, where)
        test.assertEqual(len(actual), len(expected), where)
        for i, (a, e) in enumerate(zip(actual, expected)):
            _compare(test, a, e, f"{where}[{i}]")
    elif isinstance(expected, float) and math.isnan(expected):
        test.assertTrue(math.isnan(actual), where)
    elif isinstance(expected, float):
        test.assertTrue(math.isclose(actual, expected, rel_tol=RTOL),
                        f"{where}: {actual!r} != {expected!r}")
    else:
        test.assertEqual(actual, expected, where)


def assert_golden(test: TestCase, name: str, payload: Dict[str, Any]):
    path = GOLDEN_DIR / f"{name}.json"
    payload = plain(payload)
    if os.environ.get(UPDATE_ENV) or not path.exists():
        GOLDEN_DIR.mkdir(exist_ok=True)
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + '\n')
        test.skipTest(f"recorded {path.name}")
    _compare(test, payload, json.loads(path.read_text()), name)
