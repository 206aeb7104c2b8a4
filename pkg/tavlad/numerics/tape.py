"""
Reverse-mode gradient recording.

A ``GradientTape`` hands out ``Var`` leaves through ``watch`` and records
every primitive applied to them (see ``ops``). ``gradient`` replays the
records backward once and accumulates adjoints into the watched leaves.
"""
from collections import namedtuple

import numpy as np

from ..error import ContractError

_Record = namedtuple('_Record', 'out inputs backward')


class Var:
    """A float64 value recorded on a tape"""

    __slots__ = ('value', 'tape', 'index')

    def __init__(self, value, tape, index):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f'<Var #{self.index} shape={self.value.shape}>'


class GradientTape:
    """Single-owner record of primitive operations"""

    def __init__(self):
        self._count = 0
        self._records = []

    def __len__(self):
        return len(self._records)

    def _new(self, value):
        var = Var(value, self, self._count)
        self._count += 1
        return var

    def watch(self, value):
        value = np.array(value, dtype=np.float64)
        return self._new(value)

    def record(self, value, inputs, backward):
        out = self._new(value)
        self._records.append(_Record(out.index, tuple(inputs), backward))
        return out

    def gradient(self, target, sources):
        """
        Gradients of scalar ``target`` with respect to watched ``sources``.

        ``sources`` may be a mapping of name to Var (a dict is returned) or a
        sequence of Vars (a list is returned). Sources the target does not
        depend on get exact zeros.
        """
        if isinstance(sources, dict):
            names = list(sources)
            grads = self.gradient(target, [sources[k] for k in names])
            return dict(zip(names, grads))
        sources = list(sources)
        for var in sources:
            if not isinstance(var, Var) or var.tape is not self:
                raise ContractError('gradient source is not watched by this tape')
        if not isinstance(target, Var):
            return [np.zeros_like(v.value) for v in sources]
        if target.tape is not self:
            raise ContractError('gradient target was recorded on another tape')
        if target.value.size != 1:
            raise ContractError(
                f'gradient target must be scalar, got shape {target.shape}')
        adjoints = {target.index: np.ones_like(target.value)}
        for record in reversed(self._records):
            g = adjoints.get(record.out)
            if g is None:
                continue
            for x, gx in zip(record.inputs, record.backward(g)):
                if gx is None or not isinstance(x, Var):
                    continue
                prev = adjoints.get(x.index)
                adjoints[x.index] = gx if prev is None else prev + gx
        result = []
        for var in sources:
            g = adjoints.get(var.index)
            if g is None:
                g = np.zeros_like(var.value)
            result.append(np.array(g, dtype=np.float64).reshape(var.shape))
        return result
