from typing import Sequence

import numpy as np

from metaprep.autodiff import ParamSet, Tensor, functional as F
from metaprep.errors import DegenerateBatchError, IdRangeError, \
    UnknownTaskError
from metaprep.model.encoder import EncoderOutput, linear
from metaprep.tasks.batch import TaskTag

PAIR_HEAD_NAMES = {
    TaskTag.QA_MATCH: 'heads.qa_match',
    TaskTag.QQ_MATCH: 'heads.qq_match',
}
DOWNSTREAM_HEAD = 'heads.downstream'


def _rows(output: EncoderOutput, batch_index: np.ndarray,
          positions: np.ndarray) -> Tensor:
    """token states at (batch, position) pairs, as [n, d_model]"""
    batch, seq, d_model = output.token_states.shape
    if positions.size and (positions.min() < 0 or positions.max() >= seq):
        raise IdRangeError(f"positions must lie in [0, {seq})")
    flat = F.reshape(output.token_states, (batch * seq, d_model))
    return F.gather(flat, batch_index * seq + positions)


def mlm_logits(params: ParamSet, rows: Tensor) -> Tensor:
    """vocabulary logits through the tied token embedding"""
    return F.add(F.matmul(rows, F.swap_last(params['embeddings.token'])),
                 params['heads.mlm.bias'])


def mlm_loss(params: ParamSet, output: EncoderOutput,
             mask_positions: Sequence[Sequence[int]],
             mask_targets: Sequence[Sequence[int]]) -> Tensor:
    """mean cross-entropy over the masked positions only

    Args:
        params (ParamSet): model parameters
        output (EncoderOutput): encoder output for the batch
        mask_positions (Sequence[Sequence[int]]): masked positions per example
        mask_targets (Sequence[Sequence[int]]): original ids per example

    Raises:
        DegenerateBatchError: no masked position in the whole batch

    Returns:
        Tensor: scalar loss
    """
    batch_index = np.concatenate(
        [np.full(len(p), b, dtype=np.int64)
         for b, p in enumerate(mask_positions)] or [np.zeros(0, np.int64)])
    positions = np.concatenate(
        [np.asarray(p, dtype=np.int64) for p in mask_positions] or
        [np.zeros(0, np.int64)])
    targets = np.concatenate(
        [np.asarray(t, dtype=np.int64) for t in mask_targets] or
        [np.zeros(0, np.int64)])
    if positions.size == 0:
        raise DegenerateBatchError("batch has no masked positions")
    rows = _rows(output, batch_index, positions)
    return F.cross_entropy(mlm_logits(params, rows), targets)


def nsp_loss(params: ParamSet, output: EncoderOutput,
             labels: np.ndarray) -> Tensor:
    """2-class cross-entropy on the pooled state"""
    return F.cross_entropy(linear(params, 'heads.nsp', output.pooled), labels)


def pair_head(task) -> str:
    try:
        return PAIR_HEAD_NAMES[TaskTag.parse(task)]
    except KeyError:
        raise UnknownTaskError(f"no pair-matching head for {task}") from None


def pair_loss(params: ParamSet, output: EncoderOutput, labels: np.ndarray,
              task: TaskTag) -> Tensor:
    """2-class cross-entropy through the task's own linear head

    Raises:
        UnknownTaskError: task has no pair-matching head
    """
    return F.cross_entropy(linear(params, pair_head(task), output.pooled),
                           labels)


def classification_logits(params: ParamSet, output: EncoderOutput) -> Tensor:
    return linear(params, DOWNSTREAM_HEAD, output.pooled)


def cloze_logits(params: ParamSet, output: EncoderOutput,
                 blank_positions: np.ndarray,
                 candidates: np.ndarray) -> Tensor:
    """score candidate ids for each blank by dot product with the tied
    token embedding, plus a per-slot bias"""
    batch, n_candidates = candidates.shape
    rows = _rows(output, np.arange(batch), np.asarray(blank_positions))
    rows = F.reshape(rows, (batch, 1, rows.shape[-1]))
    options = F.gather(params['embeddings.token'], candidates)
    scores = F.sum(F.mul(rows, options), axis=-1)
    return F.add(scores, params[f"{DOWNSTREAM_HEAD}.bias"])
