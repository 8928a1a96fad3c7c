import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd

from metaprep.errors import EmptyLogError
from metaprep.finetune import DownstreamTask, StudyResult, \
    init_quality_study, summarize, synth_downstream
from metaprep.metatrain import MetaStepReport, MetaTrainer, build_trainer, \
    latest_step, restore_trainer_state, save_trainer_state
from metaprep.model import check_compatible, load_params, save_params
from metaprep.runlog import Phase, RunLog, RunRecord
from metaprep.cli.config import ExperimentConfig, load_config, write_config

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.jsonl'
CHECKPOINT_DIR = 'checkpoints'
FINAL_CHECKPOINT = 'final.ckpt'
# reference initializations for epoch-1 differences, first present wins
BASELINES = ('0', 'random')
FINETUNE_RUN = re.compile(r'^finetune/k=(?P<k>[^/]+)/(?P<task>[^/]+)/'
                          r'seed=(?P<seed>-?\d+)$')


def setup_run(config_path, out, seed) -> ExperimentConfig:
    config = load_config(config_path).with_overrides(out, seed)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    return config


def pretrain_run(config: ExperimentConfig, resume: bool = True,
                 stop_after: Optional[int] = None,
                 progress: bool = False) -> MetaTrainer:
    """meta pre-training with metric records and checkpoints under
    config.out, resuming from the newest checkpoint there"""
    out = Path(config.out)
    checkpoints = out / CHECKPOINT_DIR
    log = RunLog(out / METRICS_FILE)
    write_config(config, out / 'config.toml')

    trainer = build_trainer(config.meta, config.task_mix, config.model,
                            config.seed, config.data, config.dropout)
    step = latest_step(checkpoints) if resume else None
    if step is not None:
        restore_trainer_state(trainer, checkpoints, step)
        log.truncate_after(config.run_id, Phase.PRETRAIN, step)
    else:
        log.truncate_after(config.run_id, Phase.PRETRAIN, 0)

    every = config.meta.checkpoint_every

    def on_step(trainer: MetaTrainer, report: MetaStepReport):
        log.append(RunRecord(config.run_id, report.step, Phase.PRETRAIN,
                             report.metrics()))
        if every and report.step % every == 0:
            save_trainer_state(trainer, checkpoints)

    until = config.meta.total_meta_test_steps
    if stop_after is not None:
        until = min(until, stop_after)
    logger.info("pre-training %s from step %d to %d", config.run_id,
                trainer.step_count, until)
    trainer.run(until, on_step, progress)

    if trainer.step_count != latest_step(checkpoints):
        save_trainer_state(trainer, checkpoints)
    if trainer.step_count == config.meta.total_meta_test_steps:
        save_params(trainer.params, out / FINAL_CHECKPOINT)
    return trainer


def cmd_pretrain(config_path: Union[str, Path], out: Optional[str] = None,
                 seed: Optional[int] = None, resume: bool = True,
                 stop_after: Optional[int] = None,
                 progress: bool = False) -> int:
    config = setup_run(config_path, out, seed)
    trainer = pretrain_run(config, resume, stop_after, progress)
    print(f"{config.run_id}: {trainer.step_count} meta-test steps, "
          f"{trainer.objective.evaluations} loss-gradient evaluations")
    return 0


def build_tasks(config: ExperimentConfig) -> List[DownstreamTask]:
    spec = config.downstream
    return [synth_downstream(
        kind, spec.task_seed + i, spec.sizes,
        vocab_size=config.model.vocab_size, n_topics=config.data.n_topics,
        corpus_seed=config.data.corpus_seed, batch_size=spec.batch_size,
        max_len=config.model.max_len, min_sentence=config.data.min_sentence,
        max_sentence=min(config.data.max_sentence, config.model.max_len - 2),
        label_noise=spec.label_noise)
        for i, kind in enumerate(spec.kinds)]


def run_study(config: ExperimentConfig, checkpoints: Dict,
              budgets: Optional[Dict] = None,
              name: str = 'finetune') -> StudyResult:
    out = Path(config.out)
    result = init_quality_study(
        checkpoints, build_tasks(config), config.downstream.seeds, budgets,
        config.finetune.epochs, config.finetune.lr, config.model,
        run_log=RunLog(out / METRICS_FILE),
        summary_path=out / f"{name}_summary.tsv",
        dropout=config.finetune.dropout)
    print(result.table.to_string(index=False))
    return result


def cmd_finetune(config_path: Union[str, Path],
                 checkpoint: Union[str, Path], out: Optional[str] = None,
                 seed: Optional[int] = None) -> int:
    config = setup_run(config_path, out, seed)
    params = load_params(checkpoint)
    check_compatible(params, config.model)
    run_study(config, {config.meta.k: params})
    return 0


def _finetune_runs(records: List[RunRecord]) -> pd.DataFrame:
    rows = []
    for record in records:
        match = FINETUNE_RUN.match(record.run_id)
        if record.phase is not Phase.FINETUNE or match is None:
            continue
        rows.append({'k': match.group('k'), 'task': match.group('task'),
                     'seed': int(match.group('seed')), 'epoch': record.step,
                     'dev_acc': record.metrics.get('dev_acc'),
                     'test_acc': record.metrics.get('test_acc')})
    return pd.DataFrame(rows)


def epoch1_diff(table: pd.DataFrame) -> pd.Series:
    """epoch-1 mean accuracy of each row over its task's baseline

    The baseline is k=0 when the task has it, otherwise the random encoder;
    NaN for tasks with neither.
    """
    diff = pd.Series(float('nan'), index=table.index)
    for _, group in table.groupby('task', sort=False):
        keys = group['k'].astype(str)
        for name in BASELINES:
            base = group[keys == name]
            if not base.empty:
                diff[group.index] = group['epoch1_mean'] - \
                    base['epoch1_mean'].iloc[0]
                break
    return diff


def _plot(runs: pd.DataFrame, path: Path):
    import matplotlib
    matplotlib.use('Agg')
    from matplotlib import pyplot as plt

    tasks = list(runs['task'].unique())
    fig, axes = plt.subplots(1, len(tasks), figsize=(5 * len(tasks), 4),
                             squeeze=False)
    for ax, task in zip(axes[0], tasks):
        curves = runs[runs['task'] == task].groupby(['k', 'epoch'])[
            'test_acc'].mean().unstack(0)
        for k in curves.columns:
            ax.plot(curves.index, curves[k], marker='o', label=f"k={k}")
        ax.set_title(task)
        ax.set_xlabel('epoch')
        ax.set_ylabel('test accuracy')
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_report(log_dir: Union[str, Path], plot: bool = False) -> int:
    """write per-(k, task) accuracy series and a comparison table

    Raises:
        EmptyLogError: no log, a corrupt line or no fine-tuning records
    """
    log_dir = Path(log_dir)
    path = log_dir / METRICS_FILE
    if not path.exists():
        raise EmptyLogError(f"{path} does not exist")
    runs = _finetune_runs(RunLog(path).read())
    if runs.empty:
        raise EmptyLogError(f"{path} holds no fine-tuning records")

    series = runs[runs['epoch'] > 0]
    for (k, task), group in series.groupby(['k', 'task']):
        group.sort_values(['seed', 'epoch'])[
            ['seed', 'epoch', 'dev_acc', 'test_acc']].to_csv(
            log_dir / f"series_k{k}_{task}.tsv", sep='\t', index=False)

    table = summarize(runs)
    table['epoch1_diff'] = epoch1_diff(table)
    table.to_csv(log_dir / 'comparison.tsv', sep='\t', index=False)
    print(table.to_string(index=False))
    if plot:
        _plot(series, log_dir / 'accuracy.png')
    return 0
