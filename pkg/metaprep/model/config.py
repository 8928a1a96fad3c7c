from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Tuple

from metaprep.errors import ConfigError

ENCODER_PREFIXES = ('embeddings.', 'layers.', 'pooler.')
PAIR_HEADS = ('qa_match', 'qq_match')


@dataclass(frozen=True)
class ModelConfig:
    """Transformer encoder size, scaled down from BERT-base"""

    vocab_size: int = 64
    max_len: int = 32
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 64
    n_segments: int = 2
    dropout_rate: float = 0.1
    layer_norm_eps: float = 1e-12

    def __post_init__(self):
        for name in ('vocab_size', 'max_len', 'd_model', 'n_heads',
                     'n_layers', 'd_ff', 'n_segments'):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name}", "must be positive")
        if self.vocab_size < 8:
            raise ConfigError('model.vocab_size', "vocab too small (< 8)")
        if self.d_model % self.n_heads:
            raise ConfigError('model.n_heads',
                              f"d_model={self.d_model} is not divisible by "
                              f"n_heads={self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError('model.dropout_rate', "must lie in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        d, ff = self.d_model, self.d_ff
        shapes = OrderedDict()
        shapes['embeddings.token'] = (self.vocab_size, d)
        shapes['embeddings.position'] = (self.max_len, d)
        shapes['embeddings.segment'] = (self.n_segments, d)
        shapes['embeddings.norm.gain'] = (d,)
        shapes['embeddings.norm.bias'] = (d,)
        for i in range(self.n_layers):
            prefix = f"layers.{i}"
            for proj in ('query', 'key', 'value', 'output'):
                shapes[f"{prefix}.attention.{proj}.weight"] = (d, d)
                shapes[f"{prefix}.attention.{proj}.bias"] = (d,)
            shapes[f"{prefix}.attention.norm.gain"] = (d,)
            shapes[f"{prefix}.attention.norm.bias"] = (d,)
            shapes[f"{prefix}.ffn.inner.weight"] = (d, ff)
            shapes[f"{prefix}.ffn.inner.bias"] = (ff,)
            shapes[f"{prefix}.ffn.outer.weight"] = (ff, d)
            shapes[f"{prefix}.ffn.outer.bias"] = (d,)
            shapes[f"{prefix}.ffn.norm.gain"] = (d,)
            shapes[f"{prefix}.ffn.norm.bias"] = (d,)
        shapes['pooler.weight'] = (d, d)
        shapes['pooler.bias'] = (d,)
        shapes['heads.mlm.bias'] = (self.vocab_size,)
        shapes['heads.nsp.weight'] = (d, 2)
        shapes['heads.nsp.bias'] = (2,)
        for head in PAIR_HEADS:
            shapes[f"heads.{head}.weight"] = (d, 2)
            shapes[f"heads.{head}.bias"] = (2,)
        return shapes

    def parameter_count(self) -> int:
        total = 0
        for shape in self.parameter_shapes().values():
            size = 1
            for extent in shape:
                size *= extent
            total += size
        return total


def is_encoder_param(name: str) -> bool:
    return name.startswith(ENCODER_PREFIXES)
