import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import truncnorm

from metaprep.autodiff import Graph, ParamSet, Tensor, grad, \
    functional as F
from metaprep.errors import ConfigError, NonFiniteError
from metaprep.finetune.downstream import DownstreamKind, DownstreamTask
from metaprep.metatrain import Adam
from metaprep.model import DOWNSTREAM_HEAD, INIT_STD, ModelConfig, \
    check_compatible, classification_logits, cloze_logits, encode, \
    is_encoder_param
from metaprep.tasks import Batch, SeedStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 4
    lr: float = 1e-3
    dropout: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError('finetune.epochs', "must be >= 0")
        if self.lr < 0:
            raise ConfigError('finetune.lr', "must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float
    test_accuracy: float

    def metrics(self):
        return {'train_loss': self.train_loss, 'dev_acc': self.dev_accuracy,
                'test_acc': self.test_accuracy}


def init_head(task: DownstreamTask, config: ModelConfig,
              seed: int) -> ParamSet:
    """fresh task head drawn from its own stream, independent of the
    encoder"""
    entries = OrderedDict()
    if task.kind is not DownstreamKind.CLOZE:
        stream = SeedStream(seed, 'head').child(task.name)
        entries[f"{DOWNSTREAM_HEAD}.weight"] = truncnorm.rvs(
            -2.0, 2.0, loc=0.0, scale=INIT_STD,
            size=(config.d_model, task.n_classes),
            random_state=stream.generator)
    entries[f"{DOWNSTREAM_HEAD}.bias"] = np.zeros(task.n_classes)
    return ParamSet(entries)


def prepare_params(init: ParamSet, task: DownstreamTask,
                   config: ModelConfig, seed: int) -> ParamSet:
    """the encoder of init with a fresh head; pre-training heads are
    dropped

    Raises:
        CheckpointError: init lacks an encoder tensor of config
    """
    check_compatible(init, config)
    encoder = init.subset(is_encoder_param).detach()
    return encoder.merge(init_head(task, config, seed))


def task_logits(params: ParamSet, batch: Batch, config: ModelConfig,
                dropout: Optional[SeedStream] = None) -> Tensor:
    output = encode(params, batch.tokens, batch.segments,
                    batch.attention_mask, config, dropout)
    if batch.candidates is not None:
        return cloze_logits(params, output, batch.blank_positions,
                            batch.candidates)
    return classification_logits(params, output)


def evaluate(params: ParamSet, batches: Sequence[Batch],
             config: ModelConfig) -> Tuple[int, int]:
    """(correct, total) of argmax predictions"""
    params = params.detach()
    correct = total = 0
    for batch in batches:
        logits = task_logits(params, batch, config).values
        correct += int(np.sum(np.argmax(logits, axis=-1) == batch.labels))
        total += batch.size
    return correct, total


def mean_loss(params: ParamSet, batches: Sequence[Batch],
              config: ModelConfig) -> float:
    params = params.detach()
    losses = [F.cross_entropy(task_logits(params, b, config), b.labels).item()
              for b in batches]
    return float(np.mean(losses))


def _accuracy(params: ParamSet, batches: Sequence[Batch],
              config: ModelConfig) -> float:
    correct, total = evaluate(params, batches, config)
    return correct / total


def finetune(init: ParamSet, task: DownstreamTask, epochs: int = 4,
             lr: float = 1e-3, seed: int = 0,
             model_config: ModelConfig = ModelConfig(),
             dropout: bool = False) -> List[EpochRecord]:
    """fine-tune the whole model end-to-end with Adam at a constant rate

    Args:
        init (ParamSet): pre-trained (or random) parameters; never modified
        task (DownstreamTask): task to fit
        epochs (int): passes over the train split
        lr (float): Adam learning rate
        seed (int): seed for the head, batch order and dropout
        model_config (ModelConfig): encoder size init was built for
        dropout (bool): apply model_config.dropout_rate while training

    Raises:
        CheckpointError: init does not match model_config
        NonFiniteError: a training loss became non-finite

    Returns:
        List[EpochRecord]: epoch 0 (the initialization) then one record per
            epoch
    """
    FinetuneConfig(epochs, lr, dropout)
    params = prepare_params(init, task, model_config, seed)
    optimizer = Adam(lr)
    state = optimizer.init_state(params)
    order = SeedStream(seed, 'finetune').child(task.name)
    noise = SeedStream(seed, 'dropout').child(task.name) \
        if dropout and model_config.dropout_rate > 0 else None

    records = [EpochRecord(0, mean_loss(params, task.train, model_config),
                           _accuracy(params, task.dev, model_config),
                           _accuracy(params, task.test, model_config))]
    for epoch in range(1, epochs + 1):
        losses = []
        for i in order.permutation(len(task.train)):
            batch = task.train[int(i)]
            tracked = params.track(Graph())
            loss = F.cross_entropy(
                task_logits(tracked, batch, model_config, noise),
                batch.labels)
            if not loss.is_finite():
                raise NonFiniteError("non-finite fine-tuning loss", epoch)
            params, state = optimizer.update(params, grad(loss, tracked),
                                             state)
            losses.append(loss.item())
        records.append(EpochRecord(
            epoch, float(np.mean(losses)),
            _accuracy(params, task.dev, model_config),
            _accuracy(params, task.test, model_config)))
        logger.debug("%s epoch %d: loss %.4f dev %.3f test %.3f", task.name,
                     epoch, records[-1].train_loss, records[-1].dev_accuracy,
                     records[-1].test_accuracy)
    return records
