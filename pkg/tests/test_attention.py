import numpy as np
import pytest

from tavlad.attention import (
    AttentionWeights,
    attend,
    attention_map,
    cam,
    winning_class,
)
from tavlad.error import ContractError
from tavlad.numerics import GradientTape, Rng, ops


@pytest.fixture
def weights():
    return AttentionWeights(np.array([[1.0, 0.0], [0.0, 1.0]]))


def test_winning_class(weights):
    frame = np.array([[0.0, 1.0], [0.2, 0.5]])
    assert winning_class(frame, weights) == 1
    tie = np.array([[1.0, 1.0]])
    assert winning_class(tie, weights) == 0


def test_winning_class_uses_bias():
    aw = AttentionWeights(np.eye(2), bias=np.array([0.0, 10.0]))
    assert winning_class(np.array([[1.0, 0.0]]), aw) == 1


def test_cam_values(weights):
    frame = np.array([[2.0, 3.0], [4.0, 5.0]])
    result = cam(frame, weights, 1)
    assert np.array_equal(result.values, [3.0, 5.0])
    assert result.class_index == 1
    with pytest.raises(ContractError):
        cam(frame, weights, 2)


def test_attention_map_zero_weights_is_half():
    aw = AttentionWeights(np.zeros((3, 4)))
    video = Rng(0).normal((5, 6, 4))
    assert np.array_equal(attention_map(video, aw), np.full((5, 6), 0.5))


def test_attention_map_uses_winning_cam():
    aw = AttentionWeights(np.array([[4.0, 0.0], [0.0, 4.0]]))
    video = np.array([
        [[1.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 1.0]],
    ])
    attn = attention_map(video, aw)
    expected = 1.0 / (1.0 + np.exp(-np.array([[4.0, 0.0], [0.0, 4.0]])))
    assert np.allclose(attn, expected)


def test_attention_in_open_unit_interval():
    aw = AttentionWeights(Rng(1).normal((3, 5)))
    attn = attention_map(Rng(2).normal((4, 6, 5)), aw)
    assert attn.shape == (4, 6)
    assert np.all((attn > 0.0) & (attn < 1.0))


def test_attention_dimension_errors(weights):
    with pytest.raises(ContractError):
        attention_map(np.ones((2, 3, 5)), weights)
    with pytest.raises(ContractError):
        attention_map(np.ones((0, 3, 2)), weights)
    with pytest.raises(ContractError):
        AttentionWeights(np.ones(3))
    with pytest.raises(ContractError):
        AttentionWeights(np.ones((2, 3)), bias=np.ones(3))


def test_attend_gradient_reaches_winning_rows_only():
    w = np.array([[5.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 5.0]])
    # every frame favours class 0 or class 1, never class 2
    frames = np.array([
        [[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]],
        [[0.0, 1.0, 0.0], [0.0, 0.5, 0.0]],
    ])
    tape = GradientTape()
    var = tape.watch(w)
    (g,) = tape.gradient(ops.sum(attend(frames, var)), [var])
    assert np.any(g[0] != 0) and np.any(g[1] != 0)
    assert np.array_equal(g[2], np.zeros(3))


@pytest.mark.parametrize('scale', [0.01, 0.5, 3.0, 1e3])
@pytest.mark.parametrize('seed', range(5))
def test_winning_class_ignores_positive_scaling(seed, scale):
    rng = Rng(seed)
    w = rng.normal((4, 3))
    frame = rng.normal((5, 3))
    assert winning_class(frame, AttentionWeights(scale * w)) == \
        winning_class(frame, AttentionWeights(w))


@pytest.mark.parametrize('seed', range(5))
def test_cam_is_linear(seed):
    rng = Rng(seed)
    w1, w2 = rng.normal((3, 4)), rng.normal((3, 4))
    f1, f2 = rng.normal((6, 4)), rng.normal((6, 4))
    aw = AttentionWeights(w1)
    c = int(rng.integers(3))
    a, b = cam(f1, aw, c).values, cam(f2, aw, c).values
    assert np.abs(cam(f1 + f2, aw, c).values - (a + b)).max() < 1e-12
    assert np.abs(cam(2.5 * f1, aw, c).values - 2.5 * a).max() < 1e-12
    summed = cam(f1, AttentionWeights(w1 + w2), c).values
    other = cam(f1, AttentionWeights(w2), c).values
    assert np.abs(summed - (a + other)).max() < 1e-12
    scaled = cam(f1, AttentionWeights(-3.0 * w1), c).values
    assert np.abs(scaled + 3.0 * a).max() < 1e-12


@pytest.mark.parametrize('seed', range(5))
def test_attention_follows_frame_permutation(seed):
    rng = Rng(seed)
    aw = AttentionWeights(rng.normal((3, 4)))
    video = rng.normal((6, 5, 4))
    perm = rng.permutation(6)
    attn = attention_map(video, aw)
    assert np.abs(attention_map(video[perm], aw) - attn[perm]).max() < 1e-15
