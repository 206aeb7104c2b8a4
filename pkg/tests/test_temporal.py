import math

import numpy as np
import pytest

from tavlad.error import ContractError
from tavlad.numerics import Rng, grad_check, ops
from tavlad.temporal import (
    GRU_NAMES,
    GruParams,
    aggregate,
    finalize_descriptor,
    gru_step,
    run_gru,
)


def _scalar_step(x, h, p):
    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    H, P = p.Wz.shape
    z = [sig(sum(p.Wz[i][j] * x[j] for j in range(P))
             + sum(p.Uz[i][j] * h[j] for j in range(H)) + p.bz[i])
         for i in range(H)]
    r = [sig(sum(p.Wr[i][j] * x[j] for j in range(P))
             + sum(p.Ur[i][j] * h[j] for j in range(H)) + p.br[i])
         for i in range(H)]
    cand = [math.tanh(sum(p.Wh[i][j] * x[j] for j in range(P))
                      + sum(p.Uh[i][j] * r[j] * h[j] for j in range(H))
                      + p.bh[i])
            for i in range(H)]
    return [(1.0 - z[i]) * h[i] + z[i] * cand[i] for i in range(H)]


def test_zero_params_halve_state():
    p = GruParams.zeros(3, 4)
    h = np.array([1.0, -2.0, 0.5, 4.0])
    assert np.array_equal(gru_step(np.ones(3), h, p), 0.5 * h)
    assert np.array_equal(gru_step(np.ones(3), np.zeros(4), p), np.zeros(4))


@pytest.mark.parametrize('seed', range(5))
def test_gru_step_matches_scalar_oracle(seed):
    rng = Rng(seed)
    p = GruParams.init(5, 4, rng.split('p'))
    x, h = rng.normal(5), rng.normal(4)
    expected = _scalar_step(x.tolist(), h.tolist(), p)
    assert np.allclose(gru_step(x, h, p), expected, atol=1e-12)


def test_gru_step_is_bounded():
    rng = Rng(11)
    p = GruParams(**{n: 3.0 * getattr(GruParams.init(4, 6, rng), n)
                     for n in GRU_NAMES})
    h = 2.0 * rng.normal(6)
    out = gru_step(5.0 * rng.normal(4), h, p)
    assert np.abs(out).max() <= max(np.abs(h).max(), 1.0)


def test_gru_init_range():
    p = GruParams.init(7, 16, Rng(0))
    for name in GRU_NAMES:
        assert np.abs(getattr(p, name)).max() <= 0.25
    assert p.Wz.shape == (16, 7) and p.Uh.shape == (16, 16)
    assert p.bz.shape == (16,)


def test_gru_shape_errors():
    p = GruParams.zeros(3, 4)
    with pytest.raises(ContractError):
        gru_step(np.ones(2), np.zeros(4), p)
    with pytest.raises(ContractError):
        aggregate([], p)
    with pytest.raises(ContractError):
        aggregate([np.ones((2, 3)), np.ones((3, 3))], p)
    with pytest.raises(ContractError):
        aggregate([np.ones((2, 5))], p)
    with pytest.raises(ContractError):
        GruParams(**{**GruParams.zeros(3, 4).as_dict(), 'bz': np.zeros(5)})


def test_single_frame_is_one_step():
    rng = Rng(2)
    p = GruParams.init(3, 5, rng)
    frame = rng.normal((4, 3))
    out = aggregate([frame], p)
    for k in range(4):
        assert np.allclose(out[k], gru_step(frame[k], np.zeros(5), p))


def test_zero_inputs_zero_params():
    out = aggregate([np.zeros((2, 3))] * 3, GruParams.zeros(3, 4))
    assert np.array_equal(out, np.zeros((2, 4)))


def test_cluster_streams_are_independent():
    rng = Rng(3)
    p = GruParams.init(3, 4, rng.split('p'))
    frames = [rng.normal((5, 3)) for _ in range(4)]
    perm = rng.permutation(5)
    out = aggregate(frames, p)
    permuted = aggregate([f[perm] for f in frames], p)
    assert np.allclose(permuted, out[perm], atol=1e-14)


def test_frame_order_matters():
    changed = 0
    for seed in range(20):
        rng = Rng(seed)
        p = GruParams.init(4, 6, rng.split('p'))
        frames = [rng.normal((3, 4)) for _ in range(5)]
        forward = aggregate(frames, p)
        backward = aggregate(frames[::-1], p)
        if np.abs(forward - backward).max() > 1e-6:
            changed += 1
    assert changed >= 19


def test_finalize_examples():
    assert np.allclose(finalize_descriptor(np.array([[3.0, 4.0]])),
                       [0.6, 0.8])
    out = finalize_descriptor(np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert np.allclose(out, np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0))
    rand = finalize_descriptor(Rng(4).normal((4, 3)))
    assert rand.shape == (12,)
    assert abs(np.linalg.norm(rand) - 1.0) < 1e-12
    with pytest.raises(ContractError):
        finalize_descriptor(np.ones(3))


@pytest.mark.parametrize('T', [1, 3, 5])
def test_unrolled_gradients(T):
    rng = Rng(T)
    p = GruParams.init(3, 4, rng.split('p'))
    sequence = rng.normal((T, 2, 3))

    def loss_fn(tensors):
        states = run_gru(tensors['seq'], {n: tensors[n] for n in GRU_NAMES})
        return ops.sum(ops.mul(states, states))

    report = grad_check(loss_fn, {'seq': sequence, **p.as_dict()})
    assert report.passed, report.table()
