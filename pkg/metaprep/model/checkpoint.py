"""Binary checkpoint codec.

Layout: the header line ``METAPREP-CKPT v1``, a little-endian u32 record
count, then per parameter a u32 name length, the UTF-8 name, a u32 rank, one
u64 per extent and the values as little-endian float64. A trailing u64 holds
the byte length of everything before it.
"""
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Union

import numpy as np

from metaprep.autodiff import ParamSet
from metaprep.errors import CheckpointError
from metaprep.model.config import ModelConfig, is_encoder_param

logger = logging.getLogger(__name__)

HEADER = b'METAPREP-CKPT v1\n'


def encode_params(params: ParamSet) -> bytes:
    chunks = [HEADER, struct.pack('<I', len(params))]
    for name, tensor in params.items():
        raw = name.encode('utf-8')
        chunks.append(struct.pack('<I', len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack('<I', tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor.values, dtype='<f8')
                      .tobytes())
    body = b''.join(chunks)
    return body + struct.pack('<Q', len(body))


class _Reader:
    def __init__(self, data: bytes, end: int):
        self.data = data
        self.offset = 0
        self.end = end

    def take(self, size: int) -> bytes:
        if self.offset + size > self.end:
            raise CheckpointError("checkpoint is truncated")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_params(data: bytes) -> ParamSet:
    """parse checkpoint bytes

    Raises:
        CheckpointError: wrong header, bad length checksum or truncation

    Returns:
        ParamSet: parameters in stored order
    """
    if not data.startswith(HEADER):
        raise CheckpointError("not a METAPREP-CKPT v1 checkpoint")
    if len(data) < len(HEADER) + 12:
        raise CheckpointError("checkpoint is truncated")
    (length,) = struct.unpack('<Q', data[-8:])
    if length != len(data) - 8:
        raise CheckpointError(
            f"length checksum mismatch: recorded {length}, "
            f"found {len(data) - 8}")

    reader = _Reader(data, len(data) - 8)
    reader.take(len(HEADER))
    (count,) = reader.unpack('<I')
    entries = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack('<I')
        name = reader.take(name_len).decode('utf-8')
        (rank,) = reader.unpack('<I')
        shape = reader.unpack(f"<{rank}Q")
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(8 * size), dtype='<f8')
        entries[name] = values.astype(np.float64).reshape(shape)
    if reader.offset != reader.end:
        raise CheckpointError("trailing bytes after the last record")
    return ParamSet(entries)


def save_params(params: ParamSet, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_params(params.detach()))
    logger.debug("wrote %d tensors to %s", len(params), path)


def load_params(path: Union[str, Path]) -> ParamSet:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    return decode_params(path.read_bytes())


def check_compatible(params: ParamSet, config: ModelConfig):
    """verify params hold every encoder tensor of config with its shape

    Raises:
        CheckpointError: a tensor is missing or has the wrong shape
    """
    for name, shape in config.parameter_shapes().items():
        if not is_encoder_param(name):
            continue
        if name not in params:
            raise CheckpointError(f"checkpoint lacks {name}")
        if params[name].shape != tuple(shape):
            raise CheckpointError(
                f"{name}: checkpoint shape {params[name].shape}, "
                f"config expects {tuple(shape)}")
