"""Initialization-quality experiments.

``depth_sweep`` meta-pre-trains one model per depth k under the same
meta-test budget and fine-tunes each. ``warm_start_comparison`` fine-tunes
a random encoder, a k=0 base model, a meta-pre-trained model from random
init and one warm-started from the base.
"""
import dataclasses
import logging
from pathlib import Path
from typing import Dict, Optional, Union

from metaprep.autodiff import ParamSet
from metaprep.finetune import StudyResult
from metaprep.metatrain import pretrain
from metaprep.model import init_params, save_params
from metaprep.cli.commands import run_study, setup_run
from metaprep.cli.config import ExperimentConfig

logger = logging.getLogger(__name__)

WARM_START_ORDERINGS = (('scratch', 'base'), ('warm', 'scratch'),
                        ('base', 'random'))


def _pretrain(config: ExperimentConfig, k: int, init, steps: int,
              progress: bool) -> ParamSet:
    meta = dataclasses.replace(config.meta, k=k, total_meta_test_steps=steps)
    params, _ = pretrain(meta, config.task_mix, config.model, init,
                         config.data, dropout=config.dropout,
                         progress=progress)
    return params


def depth_sweep(config: ExperimentConfig,
                progress: bool = False) -> StudyResult:
    out = Path(config.out)
    steps = config.meta.total_meta_test_steps
    checkpoints: Dict[int, ParamSet] = {}
    for k in config.experiment.depths:
        checkpoints[k] = _pretrain(config, k, config.seed, steps, progress)
        save_params(checkpoints[k], out / f"depth_k{k}.ckpt")
    budgets = {k: steps for k in checkpoints}
    result = run_study(config, checkpoints, budgets, name='depth_sweep')

    depths = sorted(checkpoints)
    if 0 in checkpoints and len(depths) > 1:
        diff = result.compare(depths[-1], 0)
        logger.info("epoch-1 accuracy, k=%d over k=0: %s", depths[-1],
                    ', '.join(f"{t} {d:+.4f}" for t, d in
                              zip(diff['task'], diff['epoch1_diff'])))
    return result


def warm_start_comparison(config: ExperimentConfig,
                          progress: bool = False) -> StudyResult:
    out = Path(config.out)
    steps = config.meta.total_meta_test_steps
    k = config.experiment.warm_k
    random = init_params(config.model, config.seed)
    base = _pretrain(config, 0, random, config.experiment.base_steps,
                     progress)
    checkpoints = {
        'random': random,
        'base': base,
        'scratch': _pretrain(config, k, random, steps, progress),
        'warm': _pretrain(config, k, base, steps, progress),
    }
    for name, params in checkpoints.items():
        save_params(params, out / f"warm_start_{name}.ckpt")
    # the base model's extra steps are the point of the comparison
    budgets = {'scratch': steps, 'warm': steps}
    result = run_study(config, checkpoints, budgets, name='warm_start')

    for a, b in WARM_START_ORDERINGS:
        diff = result.compare(a, b)
        logger.info("epoch-1 accuracy, %s over %s: %s", a, b,
                    ', '.join(f"{t} {d:+.4f}" for t, d in
                              zip(diff['task'], diff['epoch1_diff'])))
    return result


def cmd_experiment(config_path: Union[str, Path], out: Optional[str] = None,
                   seed: Optional[int] = None, which: str = 'all',
                   progress: bool = False) -> int:
    config = setup_run(config_path, out, seed)
    if which in ('all', 'depth'):
        depth_sweep(config, progress)
    if which in ('all', 'warm'):
        warm_start_comparison(config, progress)
    return 0
