"""
Differentiable primitives.

Every function accepts ndarrays, python scalars or ``Var`` operands. When no
operand is a ``Var`` the plain float64 result is returned; otherwise the
result is recorded on the operands' tape together with its adjoint rule.
Leading axes of ``matmul`` and elementwise operands broadcast the numpy way;
adjoints are summed back to each operand's shape.
"""
import warnings

import numpy as np
from scipy.special import expit, logsumexp

from ..error import ContractError, DegenerateNormWarning
from .tape import Var

NORM_EPS = 1e-12


def value_of(x):
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def shape_of(x):
    return value_of(x).shape


def _tape_of(inputs):
    tape = None
    for x in inputs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ContractError('operands were recorded on different tapes')
    return tape


def _apply(value, inputs, backward):
    tape = _tape_of(inputs)
    if tape is None:
        return value
    return tape.record(value, inputs, backward)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return _apply(av + bv, (a, b), backward)


def sub(a, b):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return _unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape)

    return _apply(av - bv, (a, b), backward)


def mul(a, b):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _apply(av * bv, (a, b), backward)


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ContractError(
            f'matmul needs matrices, got shapes {av.shape} and {bv.shape}')
    if av.shape[-1] != bv.shape[-2]:
        raise ContractError(
            f'matmul inner dimensions differ: {av.shape} @ {bv.shape}')

    def backward(g):
        ga = np.matmul(g, np.swapaxes(bv, -1, -2))
        gb = np.matmul(np.swapaxes(av, -1, -2), g)
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _apply(np.matmul(av, bv), (a, b), backward)


def transpose(a):
    """Swap the last two axes"""
    av = value_of(a)

    def backward(g):
        return (np.swapaxes(g, -1, -2),)

    return _apply(np.swapaxes(av, -1, -2), (a,), backward)


def reshape(a, shape):
    av = value_of(a)

    def backward(g):
        return (g.reshape(av.shape),)

    return _apply(av.reshape(shape), (a,), backward)


def sum(a, axis=None, keepdims=False):
    av = value_of(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape),)

    return _apply(np.sum(av, axis=axis, keepdims=keepdims), (a,), backward)


def select(a, index, axis):
    """Slice ``a`` at integer ``index`` along ``axis``"""
    av = value_of(a)

    def backward(g):
        out = np.zeros_like(av)
        np.moveaxis(out, axis, 0)[index] = g
        return (out,)

    return _apply(np.take(av, index, axis=axis), (a,), backward)


def take_rows(a, index):
    """Gather rows of matrix ``a``; result shape is ``index.shape + (cols,)``"""
    av = value_of(a)
    index = np.asarray(index, dtype=np.intp)

    def backward(g):
        out = np.zeros_like(av)
        np.add.at(out, index, g)
        return (out,)

    return _apply(av[index], (a,), backward)


def concat(xs, axis=-1):
    values = [value_of(x) for x in xs]
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _apply(np.concatenate(values, axis=axis), tuple(xs), backward)


def softmax(a, axis=-1):
    av = value_of(a)
    if av.ndim == 0 or av.shape[axis] == 0:
        raise ContractError('softmax of an empty vector')
    shifted = av - np.max(av, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _apply(y, (a,), backward)


def sigmoid(a):
    av = value_of(a)
    y = expit(av)

    def backward(g):
        return (g * y * (1.0 - y),)

    return _apply(y, (a,), backward)


def tanh(a):
    av = value_of(a)
    y = np.tanh(av)

    def backward(g):
        return (g * (1.0 - y * y),)

    return _apply(y, (a,), backward)


def row_normalize(a, eps=NORM_EPS):
    """
    L2-normalize along the last axis.

    Rows whose norm is below ``eps`` pass through unchanged (with unit
    adjoint) and a DegenerateNormWarning is issued.
    """
    if eps <= 0:
        raise ContractError(f'eps must be positive, got {eps}')
    av = value_of(a)
    norms = np.linalg.norm(av, axis=-1, keepdims=True)
    ok = norms >= eps
    safe = np.where(ok, norms, 1.0)
    y = np.where(ok, av / safe, av)
    if not ok.all():
        warnings.warn(
            f'{int(np.size(ok) - np.count_nonzero(ok))} vector(s) with norm '
            f'below {eps:g} left unnormalized', DegenerateNormWarning,
            stacklevel=2)

    def backward(g):
        dot = np.sum(g * y, axis=-1, keepdims=True)
        return (np.where(ok, (g - y * dot) / safe, g),)

    return _apply(y, (a,), backward)


l2_normalize = row_normalize
intra_normalize = row_normalize


def cross_entropy(logits, labels):
    """Mean of -log softmax(logits)[label] over the rows of ``logits``"""
    lv = value_of(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if lv.ndim != 2 or labels.shape != lv.shape[:1]:
        raise ContractError(
            f'cross_entropy needs (B, C) logits and B labels, '
            f'got {lv.shape} and {labels.shape}')
    if labels.size and (labels.min() < 0 or labels.max() >= lv.shape[1]):
        raise ContractError(
            f'label out of range [0, {lv.shape[1]}): {labels.tolist()}')
    rows = np.arange(lv.shape[0])
    lse = logsumexp(lv, axis=1)
    value = np.mean(lse - lv[rows, labels])

    def backward(g):
        p = np.exp(lv - lse[:, None])
        p[rows, labels] -= 1.0
        return (g * p / lv.shape[0],)

    return _apply(np.asarray(value), (logits,), backward)
