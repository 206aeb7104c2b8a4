"""
Top-down attention from class activation maps.

For each frame the winning class is the argmax of the classifier logits on
the spatially averaged features. Its weight row projected onto every cell is
the class activation map; a sigmoid maps it to (0, 1).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .error import ContractError
from .numerics import ops
from .numerics.ops import value_of


@dataclass(frozen=True)
class AttentionWeights:
    weights: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 2 or min(weights.shape) < 1:
            raise ContractError(
                f'attention weights must be C x P, got {weights.shape}')
        if not np.all(np.isfinite(weights)):
            raise ContractError('attention weights contain non-finite values')
        object.__setattr__(self, 'weights', weights)
        if self.bias is not None:
            bias = np.asarray(self.bias, dtype=np.float64)
            if bias.shape != weights.shape[:1]:
                raise ContractError(
                    f'attention bias must have {weights.shape[0]} entries, '
                    f'got {bias.shape}')
            object.__setattr__(self, 'bias', bias)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def P(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class CamMap:
    values: np.ndarray
    class_index: int


def _check_frames(frames, weights):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim < 2:
        raise ContractError(
            f'attention: frames must be (..., N, P), got {frames.shape}')
    P = value_of(weights).shape[1]
    if frames.shape[-1] != P:
        raise ContractError(
            f'attention: features have P={frames.shape[-1]}, '
            f'weights have P={P}')
    return frames


def class_logits(frames, weights, bias=None):
    """Classifier logits of spatially averaged frames, shape (..., C)"""
    logits = np.mean(frames, axis=-2) @ np.asarray(weights).T
    if bias is not None:
        logits = logits + bias
    return logits


def winning_classes(frames, weights, bias=None):
    """Per-frame argmax class, ties to the lowest index; never differentiated"""
    frames = _check_frames(frames, weights)
    return np.argmax(class_logits(frames, value_of(weights), bias), axis=-1)


def winning_class(frame, aw):
    return int(winning_classes(frame, aw.weights, aw.bias))


def cam(frame, aw, c):
    frame = _check_frames(frame, aw.weights)
    if not 0 <= c < aw.num_classes:
        raise ContractError(
            f'class index {c} out of range [0, {aw.num_classes})')
    return CamMap(values=frame @ aw.weights[c], class_index=int(c))


def attend(frames, weights, bias=None):
    """
    Attention of shape (..., T, N) for frames of shape (..., T, N, P).

    ``weights`` may be a Var; gradients reach only the selected rows.
    """
    frames = _check_frames(frames, weights)
    winners = winning_classes(frames, weights, bias)
    selected = ops.take_rows(weights, winners)
    columns = ops.reshape(selected, winners.shape + (frames.shape[-1], 1))
    maps = ops.matmul(frames, columns)
    return ops.sigmoid(ops.reshape(maps, frames.shape[:-1]))


def attention_map(video, aw):
    """T x N attention of a FeatureVolume (or T x N x P array)"""
    frames = getattr(video, 'data', video)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise ContractError(
            f'attention: video must be non-empty T x N x P, got {frames.shape}')
    return attend(frames, aw.weights, aw.bias)
