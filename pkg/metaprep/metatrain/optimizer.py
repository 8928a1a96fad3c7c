from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import ShapeError
from metaprep.metatrain.config import MetaConfig, OuterOptimizer


@dataclass
class OptimizerState:
    step: int = 0
    first_moment: Optional[ParamSet] = None
    second_moment: Optional[ParamSet] = None


class Optimizer:
    """Base class for parameter update rules"""

    def __init__(self, lr: float):
        self.lr = lr

    def init_state(self, params: ParamSet) -> OptimizerState:
        return OptimizerState()

    def update(self, params: ParamSet, grads: ParamSet,
               state: OptimizerState) -> Tuple[ParamSet, OptimizerState]:
        """apply one update

        Args:
            params (ParamSet): current parameters
            grads (ParamSet): gradient shaped like params
            state (OptimizerState): state from the previous update

        Raises:
            NotImplementedError: must be implemented by subclass

        Returns:
            Tuple[ParamSet, OptimizerState]: new parameters and state
        """
        raise NotImplementedError


class SGD(Optimizer):
    def update(self, params, grads, state):
        return (params.axpy(-self.lr, grads),
                OptimizerState(state.step + 1))


class Adam(Optimizer):
    """Adam with bias correction and optional decoupled weight decay"""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def init_state(self, params):
        zeros = params.detach().zeros_like()
        return OptimizerState(0, zeros, zeros)

    def update(self, params, grads, state):
        if state.first_moment is None:
            state = self.init_state(params)
        t = state.step + 1
        first, second, updated = OrderedDict(), OrderedDict(), OrderedDict()
        for name, tensor in params.items():
            g = grads[name].values
            m = self.beta1 * state.first_moment[name].values + \
                (1.0 - self.beta1) * g
            v = self.beta2 * state.second_moment[name].values + \
                (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            step = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                step = step + self.weight_decay * tensor.values
            first[name], second[name] = m, v
            updated[name] = tensor.values - self.lr * step
        return (ParamSet(updated, max(params.version, grads.version) + 1),
                OptimizerState(t, ParamSet(first), ParamSet(second)))


def make_optimizer(config: MetaConfig) -> Optimizer:
    if config.outer_optimizer is OuterOptimizer.SGD:
        return SGD(config.beta)
    return Adam(config.beta, config.adam_beta1, config.adam_beta2,
                config.adam_eps, config.weight_decay)


def outer_update(theta0: ParamSet, meta_grad: ParamSet, config: MetaConfig,
                 optimizer_state: Optional[OptimizerState] = None
                 ) -> Tuple[ParamSet, OptimizerState]:
    """one outer step on the meta-gradient

    Raises:
        ShapeError: meta_grad does not match theta0

    Returns:
        Tuple[ParamSet, OptimizerState]: theta0 for the next meta step and the
            optimizer state
    """
    if not theta0.compatible(meta_grad):
        raise ShapeError('outer_update', tuple(theta0.shapes().items()),
                         tuple(meta_grad.shapes().items()))
    optimizer = make_optimizer(config)
    if optimizer_state is None:
        optimizer_state = optimizer.init_state(theta0)
    return optimizer.update(theta0.detach(), meta_grad.detach(),
                            optimizer_state)
