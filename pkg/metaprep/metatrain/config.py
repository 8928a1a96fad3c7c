from dataclasses import dataclass, field
from enum import Enum
from typing import List

from metaprep.errors import ConfigError

MAX_FULL_DEPTH = 32


class GradMode(Enum):
    FULL = 'FULL'
    FIRST_ORDER = 'FIRST_ORDER'


class OuterOptimizer(Enum):
    SGD = 'SGD'
    ADAM = 'ADAM'


@dataclass(frozen=True)
class MetaConfig:
    """Meta-training depth, step sizes and outer optimizer.

    k counts meta-train (inner) steps per meta-test step; k = 0 is plain
    multi-task training.
    """

    k: int
    alpha: float
    beta: float
    grad_mode: GradMode = GradMode.FULL
    outer_optimizer: OuterOptimizer = OuterOptimizer.ADAM
    total_meta_test_steps: int = 100
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    checkpoint_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'grad_mode', GradMode(self.grad_mode))
        object.__setattr__(self, 'outer_optimizer',
                           OuterOptimizer(self.outer_optimizer))
        if self.k < 0:
            raise ConfigError('meta.k', f"depth must be >= 0, got {self.k}")
        if self.grad_mode is GradMode.FULL and self.k > MAX_FULL_DEPTH:
            raise ConfigError('meta.k', f"FULL mode unrolls at most "
                              f"{MAX_FULL_DEPTH} steps, got {self.k}")
        if self.alpha <= 0:
            raise ConfigError('meta.alpha', "must be positive")
        if self.beta <= 0:
            raise ConfigError('meta.beta', "must be positive")
        if self.total_meta_test_steps < 0:
            raise ConfigError('meta.total_meta_test_steps',
                              "must be >= 0")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ConfigError('meta.adam_beta1', "Adam betas must lie in "
                              "[0, 1)")
        if self.weight_decay < 0:
            raise ConfigError('meta.weight_decay', "must be >= 0")
        if self.checkpoint_every < 0:
            raise ConfigError('meta.checkpoint_every', "must be >= 0")

    @property
    def evaluations_per_step(self) -> int:
        return self.k + 1


@dataclass
class MetaStepReport:
    step: int
    inner_losses: List[float]
    test_loss: float
    meta_grad_norm: float
    wallclock: float
    tags: List[str] = field(default_factory=list)

    def metrics(self):
        """flat metric map; wallclock stays out so replays compare equal"""
        out = {'test_loss': self.test_loss,
               'meta_grad_norm': self.meta_grad_norm}
        for j, loss in enumerate(self.inner_losses, 1):
            out[f"inner_loss_{j}"] = loss
        if self.tags:
            out[f"loss_{self.tags[-1]}"] = self.test_loss
        return out
