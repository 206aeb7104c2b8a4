"""
Soft-assignment VLAD encoding with attention-weighted membership.

For frame cells x_i with attention m_i the membership is
``a[i, k] = m_i * softmax_k(W_k . x_i + B_k)`` and the frame descriptor is
``V[k, j] = sum_i a[i, k] * (x_i[j] - c_k[j])``.
"""
import math

import numpy as np

from .error import ContractError
from .numerics import ops
from .numerics.ops import shape_of


def _check(frames, attn, centers):
    fshape = shape_of(frames)
    cshape = shape_of(centers)
    if len(fshape) < 2 or fshape[-1] != cshape[-1]:
        raise ContractError(
            f'vlad: features {fshape} do not match centers {cshape}')
    if attn is not None and shape_of(attn) != fshape[:-1]:
        raise ContractError(
            f'vlad: attention {shape_of(attn)} does not match features '
            f'{fshape}')


def soft_assign(frames, attn, assign_weights, assign_bias):
    """Membership of shape (..., N, K)"""
    scores = ops.add(ops.matmul(frames, ops.transpose(assign_weights)),
                     assign_bias)
    a = ops.softmax(scores, axis=-1)
    if attn is not None:
        a = ops.mul(a, ops.reshape(attn, shape_of(attn) + (1,)))
    return a


def encode(frames, attn, centers, assign_weights, assign_bias):
    """Frame descriptors of shape (..., K, P) for frames (..., N, P)"""
    _check(frames, attn, centers)
    a = soft_assign(frames, attn, assign_weights, assign_bias)
    weighted = ops.matmul(ops.transpose(a), frames)
    mass = ops.transpose(ops.sum(a, axis=-2, keepdims=True))
    return ops.sub(weighted, ops.mul(mass, centers))


def membership(frame, attn, cb):
    """N x K membership of one frame; ``attn`` None means m_i = 1"""
    frame = np.asarray(frame, dtype=np.float64)
    _check(frame, attn, cb.centers)
    return soft_assign(frame, attn, cb.assign_weights, cb.assign_bias)


def encode_frame(frame, attn, cb):
    """K x P descriptor of one N x P frame"""
    frame = np.asarray(frame, dtype=np.float64)
    return encode(frame, attn, cb.centers, cb.assign_weights, cb.assign_bias)


def encode_video_sum(video, attn, cb):
    """K x P sum of the frame descriptors of a T x N x P video"""
    frames = np.asarray(getattr(video, 'data', video), dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] == 0:
        raise ContractError(
            f'vlad: video must be non-empty T x N x P, got {frames.shape}')
    per_frame = encode(frames, attn, cb.centers, cb.assign_weights,
                       cb.assign_bias)
    return ops.sum(per_frame, axis=-3)


def vlad_oracle(frame, attn, cb, mode='soft'):
    """Naive triple-loop descriptor; ``hard`` gives m_i to the nearest center"""
    if mode not in ('soft', 'hard'):
        raise ContractError(f'unknown oracle mode {mode!r}')
    frame = np.asarray(frame, dtype=np.float64)
    _check(frame, attn, cb.centers)
    N, P = frame.shape
    K = cb.K
    out = np.zeros((K, P))
    for i in range(N):
        m = 1.0 if attn is None else float(attn[i])
        x = [float(v) for v in frame[i]]
        if mode == 'soft':
            scores = []
            for k in range(K):
                s = float(cb.assign_bias[k])
                for j in range(P):
                    s += float(cb.assign_weights[k][j]) * x[j]
                scores.append(s)
            top = max(scores)
            exps = [math.exp(s - top) for s in scores]
            total = math.fsum(exps)
            weights = [m * e / total for e in exps]
        else:
            best, best_dist = 0, math.inf
            for k in range(K):
                d = math.fsum((x[j] - float(cb.centers[k][j])) ** 2
                              for j in range(P))
                if d < best_dist:
                    best, best_dist = k, d
            weights = [m if k == best else 0.0 for k in range(K)]
        for k in range(K):
            for j in range(P):
                out[k][j] += weights[k] * (x[j] - float(cb.centers[k][j]))
    return out
