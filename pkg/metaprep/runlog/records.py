"""Append-only JSON-lines metric records"""
import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Union

from metaprep.errors import EmptyLogError

logger = logging.getLogger(__name__)


class Phase(Enum):
    PRETRAIN = 'PRETRAIN'
    FINETUNE = 'FINETUNE'
    CHECK = 'CHECK'


@dataclass
class RunRecord:
    run_id: str
    step: int
    phase: Phase
    metrics: Dict[str, float]
    timestamp: float = field(default_factory=time.time)

    def to_json(self) -> str:
        return json.dumps({
            'run_id': self.run_id,
            'step': self.step,
            'phase': self.phase.value,
            'metrics': self.metrics,
            'timestamp': self.timestamp,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str):
        raw = json.loads(line)
        return cls(raw['run_id'], int(raw['step']), Phase(raw['phase']),
                   {k: float(v) for k, v in raw['metrics'].items()},
                   float(raw['timestamp']))

    def same_content(self, other) -> bool:
        """equality ignoring the timestamp"""
        return (self.run_id, self.step, self.phase, self.metrics) == \
            (other.run_id, other.step, other.phase, other.metrics)


class RunLog:
    """JSON-lines file of RunRecords, one per line"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def append(self, record: RunRecord):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open('a') as f:
            f.write(record.to_json() + '\n')

    def extend(self, records: Iterable[RunRecord]):
        for record in records:
            self.append(record)

    def __iter__(self) -> Iterator[RunRecord]:
        return iter(self.read())

    def read(self, strict: bool = True) -> List[RunRecord]:
        """every record in the file

        Args:
            strict (bool): raise on an unparsable line; otherwise stop at it,
                which drops the torn tail of an interrupted append

        Raises:
            EmptyLogError: a line does not parse and strict is set

        Returns:
            List[RunRecord]: records in file order
        """
        if not self.path.exists():
            return []
        records = []
        with self.path.open() as f:
            for number, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    records.append(RunRecord.from_json(line))
                except (ValueError, KeyError, TypeError) as e:
                    if strict:
                        raise EmptyLogError(
                            f"{self.path}:{number}: corrupt record ({e})") \
                            from None
                    logger.warning("%s: dropping corrupt tail from line %d",
                                   self.path, number)
                    break
        return records

    def truncate_after(self, run_id: str, phase: Phase, step: int) -> int:
        """drop records of (run_id, phase) past step, keeping the rest

        Returns:
            int: number of records removed
        """
        records = self.read(strict=False)
        kept = [r for r in records if not (
            r.run_id == run_id and r.phase is phase and r.step > step)]
        removed = len(records) - len(kept)
        if removed:
            logger.warning("%s: truncating %d records past step %d",
                           self.path, removed, step)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open('w') as f:
            for record in kept:
                f.write(record.to_json() + '\n')
        return removed

    def last_step(self, run_id: str, phase: Phase) -> Optional[int]:
        steps = [r.step for r in self.read(strict=False)
                 if r.run_id == run_id and r.phase is phase]
        return max(steps) if steps else None
