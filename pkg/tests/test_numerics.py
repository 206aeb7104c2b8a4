import math

import numpy as np
import pytest

from tavlad.error import ContractError, DegenerateNormWarning, GradCheckError
from tavlad.numerics import GradientTape, Rng, grad_check, ops, relative_error
from tavlad.numerics.ops import value_of


def test_tape_square_gradient():
    tape = GradientTape()
    x = tape.watch([1.0, -2.0, 3.0])
    y = ops.sum(ops.mul(x, x))
    (g,) = tape.gradient(y, [x])
    assert np.array_equal(g, [2.0, -4.0, 6.0])


def test_tape_unreachable_source_gets_zeros():
    tape = GradientTape()
    x = tape.watch(np.ones((2, 3)))
    unused = tape.watch(np.ones(4))
    y = ops.sum(ops.tanh(x))
    grads = tape.gradient(y, {'x': x, 'unused': unused})
    assert np.array_equal(grads['unused'], np.zeros(4))
    assert grads['x'].shape == (2, 3)


def test_tape_constant_target():
    tape = GradientTape()
    x = tape.watch(np.ones(3))
    (g,) = tape.gradient(np.float64(2.0), [x])
    assert np.array_equal(g, np.zeros(3))


def test_tape_rejects_foreign_vars():
    a, b = GradientTape(), GradientTape()
    x, y = a.watch(1.0), b.watch(2.0)
    with pytest.raises(ContractError):
        ops.add(x, y)
    with pytest.raises(ContractError):
        a.gradient(ops.mul(x, x), [y])


def test_tape_non_scalar_target():
    tape = GradientTape()
    x = tape.watch(np.ones(3))
    with pytest.raises(ContractError):
        tape.gradient(ops.mul(x, x), [x])


def test_ops_plain_arrays_stay_plain():
    out = ops.matmul(np.eye(2), np.ones((2, 3)))
    assert isinstance(out, np.ndarray)
    assert out.shape == (2, 3)


def test_matmul_shape_errors():
    with pytest.raises(ContractError):
        ops.matmul(np.ones(3), np.ones((3, 2)))
    with pytest.raises(ContractError):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_softmax_stable():
    y = ops.softmax(np.array([1000.0, 1000.0]))
    assert np.allclose(y, [0.5, 0.5])
    y = ops.softmax(np.array([[0.0, math.log(3.0)]]))
    assert np.allclose(y, [[0.25, 0.75]])


def test_softmax_empty():
    with pytest.raises(ContractError):
        ops.softmax(np.zeros(0))


def test_sigmoid_values():
    assert ops.sigmoid(np.array(0.0)) == 0.5
    y = ops.sigmoid(np.array([-800.0, 800.0]))
    assert y[0] == 0.0 and y[1] == 1.0


def test_row_normalize():
    assert np.allclose(ops.l2_normalize(np.array([3.0, 4.0])), [0.6, 0.8])
    rows = ops.intra_normalize(np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert np.allclose(rows, np.eye(2))


def test_row_normalize_degenerate_passes_through():
    x = np.array([[0.0, 0.0], [3.0, 4.0]])
    with pytest.warns(DegenerateNormWarning):
        y = ops.row_normalize(x)
    assert np.array_equal(y[0], [0.0, 0.0])
    assert np.allclose(y[1], [0.6, 0.8])


def test_row_normalize_bad_eps():
    with pytest.raises(ContractError):
        ops.row_normalize(np.ones(3), eps=0.0)


def test_cross_entropy_values():
    assert float(ops.cross_entropy(np.zeros((1, 2)), [0])) == \
        pytest.approx(math.log(2.0), abs=1e-12)
    assert float(ops.cross_entropy(np.array([[100.0, 0.0]]), [0])) < 1e-12
    with pytest.raises(ContractError):
        ops.cross_entropy(np.zeros((1, 2)), [2])


@pytest.mark.parametrize('seed', range(10))
def test_softmax_ignores_constant_shift(seed):
    rng = Rng(seed)
    v = 3.0 * rng.normal(7)
    c = 50.0 * rng.normal()
    y = ops.softmax(v)
    assert np.abs(ops.softmax(v + c) - y).max() < 1e-12
    assert abs(y.sum() - 1.0) < 1e-12


def test_sigmoid_is_symmetric():
    x = np.concatenate([np.linspace(-40.0, 40.0, 801),
                        Rng(2).normal(200)])
    assert np.abs(ops.sigmoid(x) + ops.sigmoid(-x) - 1.0).max() <= 1e-15


@pytest.mark.parametrize('seed', range(10))
def test_l2_normalize_is_idempotent(seed):
    x = Rng(seed).normal((4, 6))
    once = ops.l2_normalize(x)
    assert np.abs(ops.l2_normalize(once) - once).max() < 1e-12
    assert np.abs(np.linalg.norm(once, axis=-1) - 1.0).max() < 1e-12


def _weighted_sum(y, weights):
    return ops.sum(ops.mul(y, weights))


OP_LOSSES = {
    'softmax': (lambda p, c: _weighted_sum(ops.softmax(p['x']), c), (3, 4)),
    'sigmoid': (lambda p, c: _weighted_sum(ops.sigmoid(p['x']), c), (3, 4)),
    'tanh': (lambda p, c: _weighted_sum(ops.tanh(p['x']), c), (3, 4)),
    'row_normalize': (
        lambda p, c: _weighted_sum(ops.row_normalize(p['x']), c), (3, 4)),
    'matmul': (
        lambda p, c: _weighted_sum(ops.matmul(p['x'], ops.transpose(p['x'])),
                                   c[:, :3]), (3, 4)),
    'cross_entropy': (
        lambda p, c: ops.cross_entropy(p['x'], [0, 3, 1]), (3, 4)),
}


@pytest.mark.parametrize('seed', range(10))
@pytest.mark.parametrize('op', sorted(OP_LOSSES))
def test_op_gradients_match_central_differences(op, seed):
    loss_fn, shape = OP_LOSSES[op]
    rng = Rng(seed).split(op)
    weights = rng.normal(shape)
    params = {'x': rng.normal(shape)}
    report = grad_check(lambda p: loss_fn(p, weights), params)
    assert report.passed, report.table()


def test_grad_check_composite_ops():
    rng = Rng(7)
    params = {
        'w': rng.normal((4, 3)),
        'x': rng.normal((2, 5, 4)),
        'b': rng.normal(3),
    }

    # every input reaches a distinct logit, none through a softmax shift
    def loss_fn(p):
        h = ops.tanh(ops.add(ops.matmul(p['x'], p['w']), p['b']))
        h = ops.intra_normalize(h)
        picked = ops.concat([ops.select(h, 1, axis=-2),
                             ops.take_rows(p['w'], np.array([0, 2]))],
                            axis=-2)
        s = ops.softmax(ops.reshape(picked, (2, 6)), axis=-1)
        pooled = ops.sum(h, axis=0)
        logits = ops.add(ops.reshape(ops.sigmoid(s), (4, 3)),
                         ops.take_rows(pooled, np.array([0, 2, 3, 4])))
        return ops.cross_entropy(ops.transpose(logits), [0, 2, 1])

    report = grad_check(loss_fn, params)
    assert report.passed, report.table()
    assert set(report.checks) == {'w', 'x', 'b'}


def test_grad_check_detects_wrong_adjoint():
    def bad_square(x):
        value = value_of(x) ** 2
        if hasattr(x, 'tape'):
            return x.tape.record(value, (x,), lambda g: (g * value_of(x),))
        return value

    report = grad_check(lambda p: ops.sum(bad_square(p['x'])),
                        {'x': np.array([1.0, 2.0])})
    assert not report.passed
    assert report.failures()[0].name == 'x'


def test_grad_check_eps_range():
    with pytest.raises(ContractError):
        grad_check(lambda p: ops.sum(p['x']), {'x': np.ones(2)}, eps=1e-2)


def test_grad_check_non_finite_loss():
    def loss_fn(p):
        x = value_of(p['x'])
        if not isinstance(p['x'], np.ndarray):
            return ops.sum(p['x'])
        return np.float64(np.inf) if x[0] > 1.0 else ops.sum(p['x'])

    with pytest.raises(GradCheckError) as info:
        grad_check(loss_fn, {'x': np.array([1.0])})
    assert info.value.name == 'x'


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.0 + 1e-9) < 1e-9


def test_rng_reference_value():
    # first splitmix64 output for seed 0
    assert int(Rng(0).next_u64()) == 0xE220A8397B1DCDAF


def test_rng_deterministic_and_split_independent():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.uniform(10), b.uniform(10))
    fresh = Rng(42).split('child').uniform(5)
    used = Rng(42)
    used.uniform(100)
    assert np.array_equal(used.split('child').uniform(5), fresh)
    assert not np.array_equal(
        Rng(42).split('a').uniform(5), Rng(42).split('b').uniform(5))


def test_rng_draws():
    rng = Rng(3)
    u = rng.uniform(1000)
    assert u.min() >= 0.0 and u.max() < 1.0
    ints = rng.integers(5, size=200)
    assert ints.min() >= 0 and ints.max() <= 4
    perm = rng.permutation(10)
    assert sorted(perm.tolist()) == list(range(10))
    assert rng.choice([0.0, 1.0, 0.0]) == 1
    n = rng.normal(20000)
    assert abs(n.mean()) < 0.05
    assert abs(n.std() - 1.0) < 0.05
