"""
Deterministic splitmix64 random streams.

Algorithm: the i-th output (i = 1, 2, ...) of a stream with 64-bit seed ``s``
is ``mix(s + i * 0x9E3779B97F4A7C15 mod 2^64)`` where ``mix`` is the
splitmix64 finalizer (xor-shift 30, multiply 0xBF58476D1CE4E5B9, xor-shift
27, multiply 0x94D049BB133111EB, xor-shift 31). Outputs are computed in
vectorized uint64 arithmetic, so a stream is the same on every platform.

Split rule: ``split(label)`` returns the stream seeded with
``mix(s XOR fnv1a64(utf8(label)))``. It depends only on the parent's seed and
the label, never on how many values the parent has produced.

Derived draws: uniform doubles are ``(u >> 11) * 2^-53``; normals use
Box-Muller on two uniforms (``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``); integers
below ``n`` are ``floor(uniform * n)``; permutations sort uniform keys.
"""
import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z):
    with np.errstate(over='ignore'):
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def fnv1a64(data):
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


class Rng:

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def __repr__(self):
        return f'<Rng seed={self.seed:#018x} counter={self.counter}>'

    def split(self, label):
        key = np.array([self.seed ^ fnv1a64(str(label).encode('utf-8'))],
                       dtype=np.uint64)
        return Rng(int(_mix(key)[0]))

    def next_u64(self, size=None):
        n = _count(size)
        steps = np.arange(self.counter + 1, self.counter + n + 1,
                          dtype=np.uint64)
        self.counter += n
        with np.errstate(over='ignore'):
            out = _mix(np.uint64(self.seed) + steps * _GAMMA)
        return _shaped(out, size)

    def uniform(self, size=None):
        u = self.next_u64(_count(size)) >> np.uint64(11)
        out = u.astype(np.float64) * (2.0 ** -53)
        return _shaped(out, size)

    def normal(self, size=None):
        n = _count(size)
        u = self.uniform(2 * n)
        radius = np.sqrt(-2.0 * np.log1p(-u[:n]))
        out = radius * np.cos(2.0 * np.pi * u[n:])
        return _shaped(out, size)

    def integers(self, high, size=None):
        if high < 1:
            raise ValueError(f'high must be positive, got {high}')
        out = np.floor(self.uniform(_count(size)) * high).astype(np.int64)
        out = np.minimum(out, high - 1)
        return _shaped(out, size)

    def permutation(self, n):
        return np.argsort(self.uniform(n), kind='stable')

    def choice(self, weights):
        """Index drawn with probability proportional to ``weights``"""
        cdf = np.cumsum(np.asarray(weights, dtype=np.float64))
        x = float(self.uniform(1)[0]) * cdf[-1]
        return min(int(np.searchsorted(cdf, x, side='right')), len(cdf) - 1)


def _count(size):
    if size is None:
        return 1
    return int(np.prod(size))


def _shaped(out, size):
    if size is None:
        return out[0]
    return out.reshape(size)
