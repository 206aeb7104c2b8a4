"""
Bit-exact binary formats, all little-endian.

TAVF  feature volume::

    "TAVF" | u32 version=1 | u32 T | u32 rows | u32 cols | u32 P
    | T*rows*cols*P f32, [t][cell][channel] order

TAVW  attention (classifier) weights::

    "TAVW" | u32 version=1 | u32 C | u32 P | u8 has_bias
    | C*P f32 row-major | C f32 bias when has_bias

TAVC  tensor container (checkpoints, codebooks)::

    "TAVC" | u32 version=1 | u32 count
    | count * (u32 name_len | name utf-8 | u32 ndim | ndim*u32 dims | f64 payload)
    | u8 aggregator (0 gru, 1 sum) | u8 attention_enabled | f64 dropout_rate
    | u32 stage

Tensors are written in sorted-name order so write-read-write is byte-identical.
"""
import logging
import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..attention import AttentionWeights
from ..error import ContractError
from .binary import ByteReader, read_bytes, write_bytes

LOG = logging.getLogger(__name__)

VERSION = 1
TAVF_MAGIC = b'TAVF'
TAVW_MAGIC = b'TAVW'
TAVC_MAGIC = b'TAVC'
MAX_NDIM = 8

AGGREGATOR_CODES = {'gru': 0, 'sum': 1}
_AGGREGATOR_NAMES = {v: k for k, v in AGGREGATOR_CODES.items()}

_TAVF_HEADER = struct.Struct('<4sIIIII')
_TAVW_HEADER = struct.Struct('<4sIIIB')
_FLAGS = struct.Struct('<BBdI')


@dataclass(frozen=True)
class FeatureVolume:
    data: np.ndarray
    grid: Tuple[int, int]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        rows, cols = self.grid
        if data.ndim != 3 or min(data.shape) < 1 or rows < 1 or cols < 1:
            raise ContractError(f'feature volume needs positive T x N x P, '
                                f'got {data.shape} on grid {self.grid}')
        if data.shape[1] != rows * cols:
            raise ContractError(f'N={data.shape[1]} does not match grid '
                                f'{rows}x{cols}')
        if not np.all(np.isfinite(data)):
            raise ContractError('feature volume contains non-finite values')
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'grid', (int(rows), int(cols)))

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def N(self):
        return self.data.shape[1]

    @property
    def P(self):
        return self.data.shape[2]


def write_features(path, volume):
    rows, cols = volume.grid
    header = _TAVF_HEADER.pack(
        TAVF_MAGIC, VERSION, volume.T, rows, cols, volume.P)
    write_bytes(path, header + volume.data.astype('<f4').tobytes())


def read_features(path):
    reader = ByteReader(read_bytes(path), path)
    reader.magic(TAVF_MAGIC)
    reader.version(VERSION)
    start, dims = reader.unpack('IIII', 'header')
    if min(dims) < 1:
        reader.fail(f'zero dimension in header {dims}', start)
    T, rows, cols, P = dims
    data = reader.floats(T * rows * cols * P, '<f4', 'payload')
    reader.finish()
    return FeatureVolume(data.reshape(T, rows * cols, P), (rows, cols))


def write_attention_weights(path, weights):
    C, P = weights.weights.shape
    has_bias = weights.bias is not None
    parts = [
        _TAVW_HEADER.pack(TAVW_MAGIC, VERSION, C, P, int(has_bias)),
        weights.weights.astype('<f4').tobytes(),
    ]
    if has_bias:
        parts.append(weights.bias.astype('<f4').tobytes())
    write_bytes(path, b''.join(parts))


def read_attention_weights(path):
    reader = ByteReader(read_bytes(path), path)
    reader.magic(TAVW_MAGIC)
    reader.version(VERSION)
    start, (C, P) = reader.unpack('II', 'header')
    if C < 1 or P < 1:
        reader.fail(f'zero dimension in header C={C} P={P}', start)
    flag_at, (has_bias,) = reader.unpack('B', 'bias flag')
    if has_bias not in (0, 1):
        reader.fail(f'bias flag must be 0 or 1, got {has_bias}', flag_at)
    weights = reader.floats(C * P, '<f4', 'weights').reshape(C, P)
    bias = reader.floats(C, '<f4', 'bias') if has_bias else None
    reader.finish()
    return AttentionWeights(weights, bias)


@dataclass(frozen=True)
class ContainerFlags:
    aggregator: str = 'gru'
    attention_enabled: bool = True
    dropout_rate: float = 0.5
    stage: int = 0


def write_container(path, tensors, flags):
    parts = [TAVC_MAGIC, struct.pack('<II', VERSION, len(tensors))]
    for name in sorted(tensors):
        value = np.asarray(tensors[name], dtype=np.float64)
        encoded = name.encode('utf-8')
        parts.append(struct.pack('<I', len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f'<I{value.ndim}I', value.ndim, *value.shape))
        parts.append(value.astype('<f8').tobytes())
    parts.append(_FLAGS.pack(
        AGGREGATOR_CODES[flags.aggregator], int(flags.attention_enabled),
        float(flags.dropout_rate), int(flags.stage)))
    write_bytes(path, b''.join(parts))
    LOG.info('wrote %d tensors to %s', len(tensors), path)


def read_container(path):
    reader = ByteReader(read_bytes(path), path)
    reader.magic(TAVC_MAGIC)
    reader.version(VERSION)
    count = reader.u32('tensor count')
    tensors = {}
    for _ in range(count):
        name_at = reader.offset
        name_len = reader.u32('name length')
        try:
            name = reader.take(name_len, 'tensor name').decode('utf-8')
        except UnicodeDecodeError:
            reader.fail('tensor name is not utf-8', name_at + 4)
        if name in tensors:
            reader.fail(f'duplicate tensor {name!r}', name_at)
        ndim_at = reader.offset
        ndim = reader.u32('ndim')
        if ndim > MAX_NDIM:
            reader.fail(f'tensor {name!r} has {ndim} dims', ndim_at)
        start, dims = reader.unpack(f'{ndim}I', f'dims of {name!r}')
        if ndim < 1 or min(dims) < 1:
            reader.fail(f'tensor {name!r} has empty dims {list(dims)}', start)
        size = int(np.prod(dims))
        tensors[name] = reader.floats(size, '<f8', f'payload of {name!r}') \
            .reshape(dims)
    start, (aggregator, attention, dropout, stage) = reader.unpack(
        'BBdI', 'flags')
    if aggregator not in _AGGREGATOR_NAMES:
        reader.fail(f'unknown aggregator code {aggregator}', start)
    if attention not in (0, 1):
        reader.fail(f'attention flag must be 0 or 1, got {attention}',
                    start + 1)
    reader.finish()
    flags = ContainerFlags(
        aggregator=_AGGREGATOR_NAMES[aggregator],
        attention_enabled=bool(attention),
        dropout_rate=dropout,
        stage=stage,
    )
    return tensors, flags
