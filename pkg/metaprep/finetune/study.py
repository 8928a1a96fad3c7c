import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Hashable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from metaprep.autodiff import ParamSet
from metaprep.errors import BudgetMismatchError, ConfigError
from metaprep.finetune.downstream import DownstreamTask
from metaprep.finetune.harness import finetune
from metaprep.model import ModelConfig
from metaprep.runlog import Phase, RunLog, RunRecord

logger = logging.getLogger(__name__)

THREADS_ENV = 'METAPREP_THREADS'
SUMMARY_COLUMNS = ['k', 'task', 'seed', 'epoch', 'dev_acc', 'test_acc']


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == '':
        return default
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"not an integer: {raw!r}") from None
    if count < 1:
        raise ConfigError(THREADS_ENV, "must be >= 1")
    return count


def check_budgets(budgets: Mapping[Hashable, int]):
    """
    Raises:
        BudgetMismatchError: checkpoints saw different meta-test step counts
    """
    distinct = set(budgets.values())
    if len(distinct) > 1:
        raise BudgetMismatchError(
            "checkpoints were pre-trained for different meta-test steps: " +
            ', '.join(f"{k}={v}" for k, v in budgets.items()))


def _stderr(values: pd.Series) -> float:
    if len(values) < 2:
        return float('nan')
    return float(values.std(ddof=1) / np.sqrt(len(values)))


def summarize(runs: pd.DataFrame) -> pd.DataFrame:
    """mean and standard error of epoch-1 and final test accuracy per
    (k, task); stderr is NaN for a single seed"""
    rows = []
    for (k, task), group in runs.groupby(['k', 'task'], sort=False):
        last = group['epoch'].max()
        first = group[group['epoch'] == min(1, last)]['test_acc']
        final = group[group['epoch'] == last]['test_acc']
        rows.append({
            'k': k, 'task': task, 'n_seeds': group['seed'].nunique(),
            'epoch1_mean': float(first.mean()),
            'epoch1_stderr': _stderr(first),
            'final_mean': float(final.mean()), 'final_stderr': _stderr(final),
        })
    return pd.DataFrame(rows)


@dataclass
class StudyResult:
    runs: pd.DataFrame
    table: pd.DataFrame

    def compare(self, a: Hashable, b: Hashable) -> pd.DataFrame:
        """per-task difference of initialization a over b"""
        left = self.table[self.table['k'] == a].set_index('task')
        right = self.table[self.table['k'] == b].set_index('task')
        out = pd.DataFrame({
            'epoch1_diff': left['epoch1_mean'] - right['epoch1_mean'],
            'final_diff': left['final_mean'] - right['final_mean'],
        })
        return out.reset_index()

    def write_summary(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.runs[SUMMARY_COLUMNS].to_csv(path, sep='\t', index=False)


def init_quality_study(checkpoints: Mapping[Hashable, ParamSet],
                       tasks: Sequence[DownstreamTask], seeds: Sequence[int],
                       budgets: Optional[Mapping[Hashable, int]] = None,
                       epochs: int = 4, lr: float = 1e-3,
                       model_config: ModelConfig = ModelConfig(),
                       threads: Optional[int] = None,
                       run_log: Optional[RunLog] = None,
                       summary_path: Optional[Union[str, Path]] = None,
                       dropout: bool = False) -> StudyResult:
    """fine-tune every (checkpoint, task, seed) and compare early epochs

    Args:
        checkpoints (Mapping[Hashable, ParamSet]): label (usually the depth
            k) -> initialization
        tasks (Sequence[DownstreamTask]): downstream tasks
        seeds (Sequence[int]): fine-tuning seeds
        budgets (Optional[Mapping[Hashable, int]]): meta-test steps behind
            each checkpoint; all must be equal
        threads (Optional[int]): worker threads, METAPREP_THREADS by default
        run_log (Optional[RunLog]): receives one FINETUNE record per epoch
        summary_path (Optional[Union[str, Path]]): tab-separated table with
            columns k, task, seed, epoch, dev_acc, test_acc
        dropout (bool): fine-tune with model_config.dropout_rate

    Raises:
        BudgetMismatchError: unequal budgets

    Returns:
        StudyResult: per-epoch runs and the aggregated table
    """
    if budgets is not None:
        check_budgets(budgets)
    jobs = [(k, task, seed) for k in checkpoints for task in tasks
            for seed in seeds]
    threads = threads or worker_count()

    def run(job):
        k, task, seed = job
        return finetune(checkpoints[k], task, epochs, lr, seed, model_config,
                        dropout)

    logger.info("initialization study: %d runs on %d threads", len(jobs),
                threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results: List[Any] = list(pool.map(run, jobs))

    rows = []
    for (k, task, seed), records in zip(jobs, results):
        for record in records:
            rows.append({'k': k, 'task': task.name, 'seed': seed,
                         'epoch': record.epoch,
                         'train_loss': record.train_loss,
                         'dev_acc': record.dev_accuracy,
                         'test_acc': record.test_accuracy})
            if run_log is not None:
                run_log.append(RunRecord(
                    f"finetune/k={k}/{task.name}/seed={seed}", record.epoch,
                    Phase.FINETUNE, record.metrics()))
    runs = pd.DataFrame(rows, columns=SUMMARY_COLUMNS + ['train_loss'])
    result = StudyResult(runs, summarize(runs))
    if summary_path is not None:
        result.write_summary(summary_path)
        logger.info("study summary written to %s", summary_path)
    return result
