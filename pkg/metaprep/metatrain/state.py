"""Trainer checkpoints for exact resume.

A checkpoint at step n is three files in one directory: ``step_<n>.ckpt``
with the parameters, ``step_<n>.optim.ckpt`` with the Adam moments (absent
for SGD) and ``step_<n>.json`` with the step count, evaluation counter and
random stream positions.
"""
import json
import logging
import re
from collections import OrderedDict
from pathlib import Path
from typing import Optional, Union

from metaprep.autodiff import ParamSet
from metaprep.errors import CheckpointError
from metaprep.metatrain.optimizer import OptimizerState
from metaprep.metatrain.trainer import MetaTrainer
from metaprep.model import load_params, save_params
from metaprep.tasks import SeedStream

logger = logging.getLogger(__name__)

STEP_PATTERN = re.compile(r'^step_(\d+)\.json$')
FIRST, SECOND = 'first/', 'second/'


def checkpoint_path(directory: Union[str, Path], step: int) -> Path:
    return Path(directory) / f"step_{step:06d}.ckpt"


def _paths(directory: Union[str, Path], step: int):
    directory = Path(directory)
    stem = f"step_{step:06d}"
    return (directory / f"{stem}.ckpt", directory / f"{stem}.optim.ckpt",
            directory / f"{stem}.json")


def latest_step(directory: Union[str, Path]) -> Optional[int]:
    directory = Path(directory)
    if not directory.is_dir():
        return None
    steps = [int(m.group(1)) for m in
             (STEP_PATTERN.match(p.name) for p in directory.iterdir()) if m]
    return max(steps) if steps else None


def save_trainer_state(trainer: MetaTrainer,
                       directory: Union[str, Path]) -> Path:
    """write parameters, optimizer moments and stream positions

    Returns:
        Path: the parameter checkpoint
    """
    params_path, optim_path, meta_path = _paths(directory, trainer.step_count)
    save_params(trainer.params, params_path)

    state = trainer.optimizer_state
    if state.first_moment is not None:
        moments = OrderedDict()
        for name, tensor in state.first_moment.items():
            moments[FIRST + name] = tensor
        for name, tensor in state.second_moment.items():
            moments[SECOND + name] = tensor
        save_params(ParamSet(moments), optim_path)

    dropout = trainer.objective.dropout \
        if hasattr(trainer.objective, 'dropout') else None
    meta = {
        'step': trainer.step_count,
        'k': trainer.config.k,
        'grad_mode': trainer.config.grad_mode.value,
        'optimizer_step': state.step,
        'evaluations': trainer.objective.evaluations,
        'batch_stream': trainer.stream.state(),
        'dropout_stream': dropout.state() if dropout is not None else None,
    }
    meta_path.write_text(json.dumps(meta, indent=1))
    logger.info("checkpoint at step %d written to %s", trainer.step_count,
                params_path)
    return params_path


def read_checkpoint_meta(directory: Union[str, Path], step: int) -> dict:
    _, _, meta_path = _paths(directory, step)
    if not meta_path.exists():
        raise CheckpointError(f"no trainer state for step {step} in "
                              f"{directory}")
    try:
        return json.loads(meta_path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{meta_path}: {e}") from None


def restore_trainer_state(trainer: MetaTrainer, directory: Union[str, Path],
                          step: Optional[int] = None) -> int:
    """load the checkpoint at step (newest by default) into trainer

    Raises:
        CheckpointError: no checkpoint, or one written at a different depth

    Returns:
        int: the restored step
    """
    step = latest_step(directory) if step is None else step
    if step is None:
        raise CheckpointError(f"no checkpoint in {directory}")
    meta = read_checkpoint_meta(directory, step)
    if meta['k'] != trainer.config.k:
        raise CheckpointError(f"checkpoint was trained with k={meta['k']}, "
                              f"config has k={trainer.config.k}")
    params_path, optim_path, _ = _paths(directory, step)
    params = load_params(params_path)
    if not params.compatible(trainer.params):
        raise CheckpointError(f"{params_path} does not match the model")

    trainer.params = params
    if optim_path.exists():
        moments = load_params(optim_path)
        first = ParamSet(OrderedDict(
            (n, moments[FIRST + n]) for n in params.names()))
        second = ParamSet(OrderedDict(
            (n, moments[SECOND + n]) for n in params.names()))
        trainer.optimizer_state = OptimizerState(meta['optimizer_step'],
                                                 first, second)
    else:
        trainer.optimizer_state = OptimizerState(meta['optimizer_step'])
    trainer.stream = SeedStream.from_state(meta['batch_stream'])
    if meta.get('dropout_stream') is not None:
        trainer.objective.dropout = SeedStream.from_state(
            meta['dropout_stream'])
    trainer.objective.evaluations = meta['evaluations']
    trainer.step_count = meta['step']
    logger.info("resumed from step %d in %s", step, directory)
    return step
