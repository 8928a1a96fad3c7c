import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import truncnorm

from metaprep.autodiff import ParamSet, Tensor, functional as F
from metaprep.errors import IdRangeError, ShapeError
from metaprep.model.config import ModelConfig
from metaprep.tasks.stream import SeedStream

INIT_STD = 0.02
MASKED_SCORE = -1e9


@dataclass
class EncoderOutput:
    token_states: Tensor
    pooled: Tensor
    attention: List[Tensor] = field(default_factory=list)

    def is_finite(self) -> bool:
        return self.token_states.is_finite() and self.pooled.is_finite()


def init_params(config: ModelConfig, seed: int) -> ParamSet:
    """random initialization

    Weight matrices and embeddings are drawn from a normal truncated at two
    standard deviations (std 0.02), biases are zero and layer-norm gains one.
    Every tensor draws from its own named stream, so the result depends only
    on (config, seed).

    Args:
        config (ModelConfig): model size
        seed (int): initialization seed

    Returns:
        ParamSet: parameters named as in ModelConfig.parameter_shapes
    """
    root = SeedStream(seed, 'init')
    entries = OrderedDict()
    for name, shape in config.parameter_shapes().items():
        if name.endswith('.bias'):
            entries[name] = np.zeros(shape)
        elif name.endswith('.gain'):
            entries[name] = np.ones(shape)
        else:
            entries[name] = truncnorm.rvs(
                -2.0, 2.0, loc=0.0, scale=INIT_STD, size=shape,
                random_state=root.child(name).generator)
    return ParamSet(entries)


def linear(params: ParamSet, prefix: str, x: Tensor) -> Tensor:
    return F.add(F.matmul(x, params[f"{prefix}.weight"]),
                 params[f"{prefix}.bias"])


def _norm(params: ParamSet, prefix: str, x: Tensor,
          config: ModelConfig) -> Tensor:
    return F.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"],
                        config.layer_norm_eps)


def _dropout(x: Tensor, config: ModelConfig,
             dropout: Optional[SeedStream]) -> Tensor:
    if dropout is None:
        return x
    return F.dropout(x, config.dropout_rate, dropout.generator)


def _split_heads(x: Tensor, batch: int, seq: int,
                 config: ModelConfig) -> Tensor:
    x = F.reshape(x, (batch, seq, config.n_heads, config.head_dim))
    return F.transpose(x, (0, 2, 1, 3))


def _attention(params: ParamSet, prefix: str, x: Tensor, mask_bias: Tensor,
               config: ModelConfig):
    batch, seq, _ = x.shape
    q = _split_heads(linear(params, f"{prefix}.query", x), batch, seq, config)
    k = _split_heads(linear(params, f"{prefix}.key", x), batch, seq, config)
    v = _split_heads(linear(params, f"{prefix}.value", x), batch, seq, config)

    scores = F.mul(F.matmul(q, F.swap_last(k)),
                   Tensor(1.0 / math.sqrt(config.head_dim)))
    probs = F.softmax(F.add(scores, mask_bias), axis=-1)
    context = F.transpose(F.matmul(probs, v), (0, 2, 1, 3))
    context = F.reshape(context, (batch, seq, config.d_model))
    return linear(params, f"{prefix}.output", context), probs


def _validate(tokens: np.ndarray, segments: np.ndarray,
              attention_mask: np.ndarray, config: ModelConfig):
    if tokens.ndim != 2 or tokens.shape != segments.shape or \
            tokens.shape != attention_mask.shape:
        raise ShapeError('encode', tokens.shape, segments.shape,
                         attention_mask.shape)
    if tokens.shape[1] > config.max_len:
        raise ShapeError('encode: sequence longer than max_len',
                         tokens.shape, (config.max_len,))
    if tokens.size and (tokens.min() < 0 or
                        tokens.max() >= config.vocab_size):
        raise IdRangeError(f"token ids must lie in [0, {config.vocab_size})")
    if segments.size and (segments.min() < 0 or
                          segments.max() >= config.n_segments):
        raise IdRangeError(
            f"segment ids must lie in [0, {config.n_segments})")


def encode(params: ParamSet, tokens: np.ndarray, segments: np.ndarray,
           attention_mask: np.ndarray, config: ModelConfig,
           dropout: Optional[SeedStream] = None) -> EncoderOutput:
    """run the post-layer-norm transformer encoder

    Args:
        params (ParamSet): model parameters
        tokens (np.ndarray): [batch, seq] token ids
        segments (np.ndarray): [batch, seq] segment ids
        attention_mask (np.ndarray): [batch, seq], 1 for real tokens
        config (ModelConfig): model size
        dropout (Optional[SeedStream]): stream for dropout masks; no dropout
            is applied without one

    Raises:
        IdRangeError: token or segment id out of range
        ShapeError: mismatched shapes or sequence longer than max_len

    Returns:
        EncoderOutput: token states, pooled first position and per-layer
            attention weights
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    segments = np.asarray(segments, dtype=np.int64)
    attention_mask = np.asarray(attention_mask)
    _validate(tokens, segments, attention_mask, config)
    batch, seq = tokens.shape

    x = F.add(F.add(F.gather(params['embeddings.token'], tokens),
                    F.gather(params['embeddings.position'], np.arange(seq))),
              F.gather(params['embeddings.segment'], segments))
    x = _dropout(_norm(params, 'embeddings.norm', x, config), config, dropout)

    blocked = (1.0 - attention_mask.astype(np.float64)) * MASKED_SCORE
    mask_bias = Tensor(blocked[:, None, None, :])

    attention = []
    for i in range(config.n_layers):
        prefix = f"layers.{i}"
        attended, probs = _attention(params, f"{prefix}.attention", x,
                                     mask_bias, config)
        attention.append(probs)
        x = _norm(params, f"{prefix}.attention.norm",
                  F.add(x, _dropout(attended, config, dropout)), config)

        hidden = F.gelu(linear(params, f"{prefix}.ffn.inner", x))
        out = _dropout(linear(params, f"{prefix}.ffn.outer", hidden),
                       config, dropout)
        x = _norm(params, f"{prefix}.ffn.norm", F.add(x, out), config)

    first = F.slice(x, (slice(None), 0))
    pooled = F.tanh(linear(params, 'pooler', first))
    return EncoderOutput(x, pooled, attention)
