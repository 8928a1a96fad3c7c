from typing import Any, List, Mapping, Optional, Sequence, Union

from metaprep.autodiff import ParamSet, Tensor
from metaprep.errors import UnknownTaskError
from metaprep.model import ModelConfig, encode, mlm_loss, nsp_loss, pair_loss
from metaprep.tasks import Batch, PAIR_TAGS, PretrainSampler, \
    QuadraticTask, SeedStream, TaskTag, parse_mix, sample_pretrain_batches


class Objective:
    """Base class for the losses the meta-trainer differentiates"""

    def __init__(self):
        self.evaluations = 0

    def loss(self, params: ParamSet, batch: Any) -> Tensor:
        """scalar loss of params on one batch

        Args:
            params (ParamSet): parameters, tracked when gradients are needed
            batch (Any): one batch of the objective's data type

        Raises:
            NotImplementedError: must be implemented by subclass

        Returns:
            Tensor: scalar loss
        """
        raise NotImplementedError

    def tag(self, batch: Any) -> str:
        return type(batch).__name__


class TransformerObjective(Objective):
    def __init__(self, config: ModelConfig,
                 dropout: Optional[SeedStream] = None):
        super().__init__()
        self.config = config
        self.dropout = dropout

    def loss(self, params: ParamSet, batch: Batch) -> Tensor:
        output = encode(params, batch.tokens, batch.segments,
                        batch.attention_mask, self.config, self.dropout)
        if batch.task_tag is TaskTag.MLM:
            return mlm_loss(params, output, batch.mask_positions,
                            batch.mask_targets)
        if batch.task_tag is TaskTag.NSP:
            return nsp_loss(params, output, batch.labels)
        if batch.task_tag in PAIR_TAGS:
            return pair_loss(params, output, batch.labels, batch.task_tag)
        raise UnknownTaskError(
            f"{batch.task_tag.value} is not a pre-training task")

    def tag(self, batch: Batch) -> str:
        return batch.task_tag.value


class QuadraticObjective(Objective):
    """Quadratic tasks over a single parameter vector named 'theta'"""

    def loss(self, params: ParamSet, batch: QuadraticTask) -> Tensor:
        return batch.loss(params['theta'])

    def tag(self, batch: QuadraticTask) -> str:
        return 'QUADRATIC'


class BatchSource:
    """Base class for the task distribution p(T)"""

    def sample(self, count: int, stream: SeedStream) -> List[Any]:
        raise NotImplementedError


class MixtureSource(BatchSource):
    def __init__(self, mix: Mapping[Union[str, TaskTag], float],
                 sampler: PretrainSampler):
        self.mix = parse_mix(mix)
        self.sampler = sampler

    def sample(self, count: int, stream: SeedStream) -> List[Batch]:
        return sample_pretrain_batches(self.mix, count, stream, self.sampler)


class QuadraticSource(BatchSource):
    """Uniform draws from a fixed list of quadratic tasks"""

    def __init__(self, tasks: Sequence[QuadraticTask]):
        self.tasks = list(tasks)

    def sample(self, count: int, stream: SeedStream) -> List[QuadraticTask]:
        if len(self.tasks) == 1:
            return [self.tasks[0]] * count
        return [self.tasks[int(i)]
                for i in stream.integers(len(self.tasks), size=count)]
