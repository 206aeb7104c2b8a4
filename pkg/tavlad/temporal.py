"""
Temporal aggregation of frame descriptors with K shared-parameter GRUs.

Gate convention::

    z  = sigmoid(Wz x + Uz h + bz)
    r  = sigmoid(Wr x + Ur h + br)
    h~ = tanh(Wh x + Uh (r * h) + bh)
    h' = (1 - z) * h + z * h~

Row k of every frame descriptor feeds stream k; all streams start from
h = 0 and share one parameter set.
"""
from dataclasses import dataclass, fields

import numpy as np

from .error import ContractError
from .numerics import ops
from .numerics.ops import shape_of

GRU_NAMES = ('Wz', 'Wr', 'Wh', 'Uz', 'Ur', 'Uh', 'bz', 'br', 'bh')
DEFAULT_HIDDEN = 256


@dataclass(frozen=True)
class GruParams:
    Wz: np.ndarray
    Wr: np.ndarray
    Wh: np.ndarray
    Uz: np.ndarray
    Ur: np.ndarray
    Uh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(
                self, f.name, np.asarray(getattr(self, f.name), np.float64))
        H, P = self.Wz.shape
        expected = {'W': (H, P), 'U': (H, H), 'b': (H,)}
        for name in GRU_NAMES:
            shape = getattr(self, name).shape
            if shape != expected[name[0]]:
                raise ContractError(
                    f'gru.{name} has shape {shape}, expected '
                    f'{expected[name[0]]}')

    @property
    def hidden(self):
        return self.Wz.shape[0]

    @property
    def input_size(self):
        return self.Wz.shape[1]

    @classmethod
    def init(cls, input_size, hidden, rng):
        """Uniform(-1/sqrt(H), 1/sqrt(H)) for every matrix and bias"""
        bound = 1.0 / np.sqrt(hidden)
        shapes = {'W': (hidden, input_size), 'U': (hidden, hidden),
                  'b': (hidden,)}
        values = {}
        for name in GRU_NAMES:
            u = rng.split(f'gru.{name}').uniform(shapes[name[0]])
            values[name] = (2.0 * u - 1.0) * bound
        return cls(**values)

    @classmethod
    def zeros(cls, input_size, hidden):
        return cls(**{
            name: np.zeros((hidden, input_size) if name[0] == 'W' else
                           (hidden, hidden) if name[0] == 'U' else (hidden,))
            for name in GRU_NAMES
        })

    @classmethod
    def from_tensors(cls, tensors, prefix='gru.'):
        return cls(**{name: tensors[prefix + name] for name in GRU_NAMES})

    def tensors(self, prefix='gru.'):
        return {prefix + name: getattr(self, name) for name in GRU_NAMES}

    def as_dict(self):
        return {name: getattr(self, name) for name in GRU_NAMES}


def _affine(x, h, W, U, b):
    return ops.add(ops.add(ops.matmul(x, ops.transpose(W)),
                           ops.matmul(h, ops.transpose(U))), b)


def gru_cell(x, h, p):
    """One step for x (..., P) and h (..., H); ``p`` maps GRU_NAMES to tensors"""
    z = ops.sigmoid(_affine(x, h, p['Wz'], p['Uz'], p['bz']))
    r = ops.sigmoid(_affine(x, h, p['Wr'], p['Ur'], p['br']))
    candidate = ops.tanh(_affine(x, ops.mul(r, h), p['Wh'], p['Uh'], p['bh']))
    return ops.add(ops.mul(ops.sub(1.0, z), h), ops.mul(z, candidate))


def run_gru(sequence, p):
    """Final states (..., K, H) of the streams in sequence (..., T, K, P)"""
    shape = shape_of(sequence)
    if len(shape) < 3 or shape[-3] < 1:
        raise ContractError(
            f'temporal: need a non-empty (..., T, K, P) sequence, got {shape}')
    H, P = shape_of(p['Wz'])
    if shape[-1] != P:
        raise ContractError(
            f'temporal: frame descriptors have P={shape[-1]}, GRU expects {P}')
    h = np.zeros(shape[:-3] + shape[-2:-1] + (H,))
    for t in range(shape[-3]):
        h = gru_cell(ops.select(sequence, t, axis=-3), h, p)
    return h


def finalize(states):
    """Intra-normalize rows, flatten the last two axes, L2-normalize"""
    shape = shape_of(states)
    rows = ops.intra_normalize(states)
    flat = ops.reshape(rows, shape[:-2] + (shape[-2] * shape[-1],))
    return ops.l2_normalize(flat)


def gru_step(x, h, p):
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.shape != (p.input_size,) or h.shape != (p.hidden,):
        raise ContractError(
            f'temporal: gru_step expects x ({p.input_size},) and h '
            f'({p.hidden},), got {x.shape} and {h.shape}')
    out = gru_cell(x[None], h[None], p.as_dict())
    return out[0]


def aggregate(frames, p):
    """K x H final states of a sequence of K x P frame descriptors"""
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if not frames:
        raise ContractError('temporal: empty frame sequence')
    if any(f.shape != frames[0].shape or f.ndim != 2 for f in frames):
        raise ContractError('temporal: frame descriptors differ in shape')
    return run_gru(np.stack(frames), p.as_dict())


def finalize_descriptor(M):
    """Unit-norm K*H vector from a K x H matrix"""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ContractError(f'temporal: expected K x H matrix, got {M.shape}')
    return finalize(M)
