import numpy as np
import pytest

from pylats import tensor as T
from pylats.layers import Layer, LayerSpec
from pylats.shared import GraphError, ShapeError


def test_dense_identity():
    layer = Layer(LayerSpec('dense', 'd', in_width=3, out_width=3))
    layer.W.value = np.eye(3)
    y = layer.forward(np.array([1., 2., 3.]))
    np.testing.assert_array_equal(y.value, [1., 2., 3.])


def test_conv_scalar_kernel():
    layer = Layer(LayerSpec('conv', 'c', in_channels=1, out_channels=1, kernel=1, stride=1, dims=2))
    layer.W.value = np.full((1, 1, 1, 1), 2.0)
    y = layer.forward(np.array([[[1., 2.], [3., 4.]]]))
    np.testing.assert_array_equal(y.value[0], [[2., 4.], [6., 8.]])


def test_conv_ones_kernel_zero_padding():
    layer = Layer(LayerSpec('conv', 'c', in_channels=1, out_channels=1, kernel=3, stride=1, dims=2))
    layer.W.value = np.ones((1, 1, 3, 3))
    y = layer.forward(np.ones((1, 3, 3))).value[0]
    assert y[1, 1] == 9.0
    for corner in [(0, 0), (0, 2), (2, 0), (2, 2)]:
        assert y[corner] == 4.0


def test_backward_identity_dense_gradient():
    layer = Layer(LayerSpec('dense', 'd', in_width=2, out_width=2))
    layer.W.value = np.eye(2)
    loss = T.sum(layer.forward(np.array([1., 1.])))
    T.backward(loss)
    np.testing.assert_array_equal(layer.W.gradient, np.ones((2, 2)))
    np.testing.assert_array_equal(layer.b.gradient, np.ones(2))


def test_zero_loss_gives_zero_gradients():
    layer = Layer(LayerSpec('dense', 'd', in_width=2, out_width=2))
    loss = T.mul(T.sum(layer.forward(np.array([1., -1.]))), 0.)
    T.backward(loss)
    assert not layer.W.gradient.any()
    assert not layer.b.gradient.any()


def test_backward_accumulates():
    p = T.Parameter(np.array([2.0]), 'p')
    T.backward(T.sum(T.square(p)))
    T.backward(T.sum(T.square(p)))
    np.testing.assert_allclose(p.gradient, [8.0])


def test_backward_without_graph():
    with pytest.raises(GraphError):
        T.backward(T.Tensor(np.array([1.0])))
    p = T.Parameter(np.ones(2))
    with T.no_grad():
        loss = T.sum(p)
    with pytest.raises(GraphError):
        T.backward(loss)


def test_backward_needs_scalar():
    p = T.Parameter(np.ones(3))
    with pytest.raises(ShapeError):
        T.backward(T.mul(p, 2.))


def test_take_repeated_indices_accumulate():
    p = T.Parameter(np.arange(3.), 'p')
    T.backward(T.sum(T.take(p, [0, 0, 2], axis=0)))
    np.testing.assert_array_equal(p.gradient, [2., 0., 1.])


def test_same_padding():
    assert T.same_padding(8, 3, 2) == (4, 0, 1)
    assert T.same_padding(5, 3, 1) == (5, 1, 1)


def test_conv_transpose_is_adjoint_of_conv(rng):
    # <conv(x), y> == <x, conv_transpose(y)> with shared weights and zero bias
    W = T.Parameter(rng.standard_normal((3, 2, 3, 3)))
    x = rng.standard_normal((1, 2, 8, 8))
    y = rng.standard_normal((1, 3, 4, 4))
    Wt = T.Parameter(W.value.copy())
    cx = T.conv(x, W, T.Parameter(np.zeros(3)), stride=2).value
    ty = T.conv_transpose(y, Wt, T.Parameter(np.zeros(2)), stride=2).value
    np.testing.assert_allclose(np.sum(cx * y), np.sum(x * ty), rtol=1e-12)
