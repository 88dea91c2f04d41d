import numpy as np
import pytest

from pylats import tensor as T
from pylats.optim import Adam, adam_step, grad_check, snapshot, restore
from pylats.layers import mlp
from pylats.shared import NumericalError


def test_zero_gradient_leaves_parameter():
    p = T.Parameter(np.array([1.5, -2.0]), 'p')
    opt = adam_step([p], lr=0.1)
    np.testing.assert_array_equal(p.value, [1.5, -2.0])
    np.testing.assert_array_equal(opt.m['p'], 0.)
    np.testing.assert_array_equal(opt.v['p'], 0.)
    assert opt.t == 1


def test_first_step_moves_by_lr():
    p = T.Parameter(np.array([0.0]), 'p')
    p.gradient = np.array([1.0])
    adam_step([p], lr=0.1)
    np.testing.assert_allclose(p.value, [-0.1], rtol=1e-6)


def test_state_carries_over():
    p = T.Parameter(np.array([0.0]), 'p')
    p.gradient = np.array([1.0])
    opt = adam_step([p], lr=0.1)
    adam_step([p], state=opt)
    assert opt.t == 2
    np.testing.assert_allclose(p.value, [-0.2], rtol=1e-6)


def test_non_finite_gradient_rejected():
    p = T.Parameter(np.array([1.0]), 'bad')
    p.gradient = np.array([np.nan])
    opt = Adam([p])
    with pytest.raises(NumericalError) as e:
        opt.step()
    assert e.value.where == 'bad'
    assert p.value[0] == 1.0


def test_lr_must_be_positive():
    with pytest.raises(ValueError):
        Adam([T.Parameter(np.zeros(1))], lr=0.)


def _train(seed):
    rng = np.random.default_rng(seed)
    net = mlp('n', 3, [5], 1, activation='tanh', rng=rng)
    x = rng.standard_normal((16, 3))
    y = rng.standard_normal((16, 1))
    opt = Adam(net.params(), lr=1e-2)
    for _ in range(5):
        opt.zero_grad()
        T.backward(T.mse(net(x), y))
        opt.step()
    return [p.value.copy() for p in net.params()]


def test_training_replay_is_bit_exact():
    for a, b in zip(_train(7), _train(7)):
        np.testing.assert_array_equal(a, b)


def test_two_layer_tanh_grad_check(rng):
    net = mlp('t', 4, [8], 3, activation='tanh', rng=rng)
    x = rng.standard_normal((6, 4))
    y = rng.standard_normal((6, 3))
    assert grad_check(net.params(), lambda v: T.mse(net(v), y), x, n_samples=64) < 1e-4


def test_grad_check_h_range():
    p = T.Parameter(np.ones(2))
    with pytest.raises(ValueError):
        grad_check([p], lambda v: T.sum(p), None, h=0.1)


def test_snapshot_restore():
    p = T.Parameter(np.array([1.0, 2.0]), 's')
    snap = snapshot([p])
    p.value = p.value * 10
    restore([p], snap)
    np.testing.assert_array_equal(p.value, [1.0, 2.0])
