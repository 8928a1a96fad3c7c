import logging
import time
from typing import Callable, List, Mapping, Optional, Tuple, Union

from tqdm import tqdm

from metaprep.autodiff import Graph, ParamSet
from metaprep.errors import NonFiniteError
from metaprep.metatrain.config import MetaConfig, MetaStepReport
from metaprep.metatrain.inner import compute_meta_gradient, loss_and_grad
from metaprep.metatrain.objective import BatchSource, MixtureSource, \
    Objective, TransformerObjective
from metaprep.metatrain.optimizer import make_optimizer
from metaprep.model import ModelConfig, init_params
from metaprep.tasks import PretrainSampler, SamplerConfig, SeedStream, \
    TaskTag

logger = logging.getLogger(__name__)

StepHook = Callable[['MetaTrainer', MetaStepReport], None]


class MetaTrainer:
    """Outer loop of meta pre-training.

    Every step samples k+1 batches from the source, adapts on the first k,
    differentiates the loss of the last one with respect to the starting
    parameters and applies the outer optimizer.
    """

    def __init__(self, config: MetaConfig, objective: Objective,
                 source: BatchSource, params: ParamSet):
        self.config = config
        self.objective = objective
        self.source = source
        self.optimizer = make_optimizer(config)
        self.reset(params)

    def reset(self, params: ParamSet):
        self.params = params.detach()
        self.optimizer_state = self.optimizer.init_state(self.params)
        self.stream = SeedStream(self.config.seed).child('batches')
        self.step_count = 0
        self.objective.evaluations = 0

    def step(self) -> MetaStepReport:
        start = time.perf_counter()
        step = self.step_count + 1
        batches = self.source.sample(self.config.k + 1, self.stream)
        train, test = batches[:-1], batches[-1]
        try:
            result = compute_meta_gradient(
                self.config.grad_mode, self.params, train, test,
                self.config.alpha, self.objective)
        except NonFiniteError as e:
            raise NonFiniteError(
                f"meta step {step}, inner step {e.step}: {e}", step) from e

        self.params, self.optimizer_state = self.optimizer.update(
            self.params, result.gradient, self.optimizer_state)
        if not self.params.is_finite():
            raise NonFiniteError("non-finite parameters after outer update",
                                 step)
        self.step_count = step

        report = MetaStepReport(
            step, result.inner_losses, result.test_loss,
            result.gradient.norm(), time.perf_counter() - start,
            [self.objective.tag(b) for b in batches])
        logger.debug("step %d test_loss=%.6f meta_grad_norm=%.6f", step,
                     report.test_loss, report.meta_grad_norm)
        return report

    def run(self, until: Optional[int] = None,
            on_step: Optional[StepHook] = None,
            progress: bool = False) -> List[MetaStepReport]:
        """step until step_count reaches until (total_meta_test_steps by
        default), calling on_step after every step"""
        until = self.config.total_meta_test_steps if until is None else until
        reports = []
        with tqdm(total=until, initial=self.step_count, disable=not progress,
                  desc=f"k={self.config.k}") as bar:
            while self.step_count < until:
                report = self.step()
                reports.append(report)
                if on_step is not None:
                    on_step(self, report)
                bar.update(1)
        return reports


def pretrain(config: MetaConfig,
             task_mix: Mapping[Union[str, TaskTag], float],
             model_config: ModelConfig, init: Union[ParamSet, int],
             sampler_config: SamplerConfig = SamplerConfig(),
             on_step: Optional[StepHook] = None,
             dropout: bool = False,
             progress: bool = False) -> Tuple[ParamSet, List[MetaStepReport]]:
    """meta pre-training from a seed (random init) or a warm start

    Args:
        config (MetaConfig): depth, step sizes, outer optimizer and budget
        task_mix (Mapping[Union[str, TaskTag], float]): pre-training task
            probabilities
        model_config (ModelConfig): encoder size
        init (Union[ParamSet, int]): starting parameters or an init seed
        sampler_config (SamplerConfig): corpus and batch shape
        on_step (Optional[StepHook]): called after every meta step, used for
            metric logging and checkpoints
        dropout (bool): apply model_config.dropout_rate during training
        progress (bool): show a progress bar

    Raises:
        NonFiniteError: a loss, gradient or parameter became non-finite

    Returns:
        Tuple[ParamSet, List[MetaStepReport]]: final parameters and one
            report per meta-test step
    """
    trainer = build_trainer(config, task_mix, model_config, init,
                            sampler_config, dropout)
    logger.info("meta pre-training k=%d %s for %d steps", config.k,
                config.grad_mode.value, config.total_meta_test_steps)
    reports = trainer.run(on_step=on_step, progress=progress)
    logger.info("finished after %d loss-gradient evaluations",
                trainer.objective.evaluations)
    return trainer.params, reports


def build_trainer(config: MetaConfig,
                  task_mix: Mapping[Union[str, TaskTag], float],
                  model_config: ModelConfig, init: Union[ParamSet, int],
                  sampler_config: SamplerConfig = SamplerConfig(),
                  dropout: bool = False) -> MetaTrainer:
    sampler = PretrainSampler.from_config(sampler_config,
                                          model_config.vocab_size)
    stream = None
    if dropout and model_config.dropout_rate > 0:
        stream = SeedStream(config.seed).child('dropout')
    objective = TransformerObjective(model_config, stream)
    if not isinstance(init, ParamSet):
        init = init_params(model_config, int(init))
    return MetaTrainer(config, objective, MixtureSource(task_mix, sampler),
                       init)


def multitask_train(params: ParamSet, objective: Objective,
                    source: BatchSource, lr: float, steps: int,
                    seed: int = 0) -> List[ParamSet]:
    """plain multi-task SGD on one sampled batch per step

    Draws batches from the same stream a MetaTrainer with the same seed
    would, so it is the reference trajectory for depth-0 meta-training.

    Returns:
        List[ParamSet]: parameters after every step, starting with params
    """
    stream = SeedStream(seed).child('batches')
    params = params.detach()
    trajectory = [params]
    for step in range(1, steps + 1):
        batch = source.sample(1, stream)[0]
        loss, gradient = loss_and_grad(objective, params.track(Graph()),
                                       batch)
        if not loss.is_finite():
            raise NonFiniteError("non-finite loss", step)
        params = params.axpy(-lr, gradient)
        trajectory.append(params)
    return trajectory
