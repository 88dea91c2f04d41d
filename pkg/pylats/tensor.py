__all__ = ['Tensor', 'Parameter', 'no_grad', 'is_grad_enabled', 'as_tensor', 'add', 'sub', 'mul', 'neg', 'matmul',
           'linear', 'tanh', 'relu', 'identity', 'activation', 'reshape', 'transpose', 'concat', 'stack', 'take',
           'sum', 'mean', 'square', 'mse', 'conv', 'conv_transpose', 'same_padding', 'backward', 'zero_grad']

# Internal Cell
#exporti
import itertools
from contextlib import contextmanager

import numpy as np

from .shared import ShapeError, GraphError

_grad_enabled = True
_param_ids = itertools.count()

# Cell
class Tensor:
    """
    A float64 array plus the record of how it was computed.

    Values produced by a forward pass are never modified afterwards. Gradients of intermediate tensors
    only live inside `backward`; parameters keep theirs in `Parameter.gradient`.
    """

    def __init__(self, value, parents=(), grad_fn=None, op=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.grad_fn = grad_fn
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    @property
    def requires_grad(self):
        return self.grad_fn is not None

    def numpy(self):
        return self.value

    def __repr__(self):
        return 'Tensor(shape={}, op={})'.format(self.shape, self.op)

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)

# Cell
class Parameter(Tensor):
    """
    A trainable leaf. `gradient` always has the shape of `value` and is summed into by `backward`.
    """

    def __init__(self, value, name=None):
        super().__init__(value, op='parameter')
        self.id = name if name is not None else 'param' + str(next(_param_ids))
        self.gradient = np.zeros_like(self.value)

    @property
    def requires_grad(self):
        return True

    def zero_grad(self):
        self.gradient = np.zeros_like(self.value)

    def __repr__(self):
        return 'Parameter(id={}, shape={})'.format(self.id, self.shape)

# Cell
@contextmanager
def no_grad():
    """
    Run forward passes without recording anything for backward.
    """
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled():
    return _grad_enabled

# Cell
def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)

# Internal Cell
def _make(value, parents, grad_fn, op):
    # only keep the graph when something upstream needs a gradient
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(value, parents, grad_fn, op)
    return Tensor(value, op=op)


def _unbroadcast(g, shape):
    # sum a broadcast gradient back down to `shape`
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g

# Cell
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)), 'mul')


def neg(a):
    a = as_tensor(a)
    return _make(-a.value, (a,), lambda g: (-g,), 'neg')


def square(a):
    a = as_tensor(a)
    return _make(a.value ** 2, (a,), lambda g: (2. * a.value * g,), 'square')


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError('Error: matmul of shapes {} and {}'.format(a.shape, b.shape))
    return _make(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g), 'matmul')

# Cell
def linear(x, W, b):
    """
    Affine map on the last axis: x (..., in), W (out, in), b (out,).
    """
    x = as_tensor(x)
    lead = x.shape[:-1]
    x2 = x.value.reshape(-1, x.shape[-1])
    y = x2 @ W.value.T + b.value

    def grad_fn(g):
        g2 = g.reshape(-1, W.shape[0])
        return (g2 @ W.value).reshape(x.shape), g2.T @ x2, g2.sum(axis=0)

    return _make(y.reshape(lead + (W.shape[0],)), (x, W, b), grad_fn, 'linear')

# Cell
def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.value)
    return _make(y, (x,), lambda g: (g * (1. - y ** 2),), 'tanh')


def relu(x):
    x = as_tensor(x)
    mask = x.value > 0
    return _make(np.where(mask, x.value, 0.), (x,), lambda g: (g * mask,), 'relu')


def identity(x):
    return as_tensor(x)


_activations = {'tanh': tanh, 'relu': relu, 'identity': identity}


def activation(x, kind):
    try:
        fn = _activations[kind]
    except KeyError:
        raise ValueError('Error: unknown activation ' + repr(kind) + ', expected one of ' + str(list(_activations)))
    return fn(x)

# Cell
def reshape(x, shape):
    x = as_tensor(x)
    return _make(x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), 'reshape')


def transpose(x, axes):
    x = as_tensor(x)
    inv = np.argsort(axes)
    return _make(np.transpose(x.value, axes), (x,), lambda g: (np.transpose(g, inv),), 'transpose')


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return _make(np.concatenate([t.value for t in tensors], axis=axis), tensors,
                 lambda g: tuple(np.split(g, cuts, axis=axis)), 'concat')


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    return _make(np.stack([t.value for t in tensors], axis=axis), tensors,
                 lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))), 'stack')


def take(x, indices, axis=0):
    """
    Gather along `axis`; repeated indices accumulate in the gradient.
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % x.value.ndim

    def grad_fn(g):
        gx = np.zeros_like(x.value)
        gm = np.moveaxis(g, list(range(axis, axis + indices.ndim)), list(range(indices.ndim)))
        np.add.at(np.moveaxis(gx, axis, 0), indices, gm)
        return (gx,)

    return _make(np.take(x.value, indices, axis=axis), (x,), grad_fn, 'take')

# Cell
def sum(x):
    x = as_tensor(x)
    return _make(np.array([x.value.sum()]), (x,), lambda g: (np.full(x.shape, g[0]),), 'sum')


def mean(x):
    x = as_tensor(x)
    n = x.value.size
    return _make(np.array([x.value.mean()]), (x,), lambda g: (np.full(x.shape, g[0] / n),), 'mean')


def mse(pred, target):
    """
    Mean squared error as a shape [1] tensor.
    """
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError('Error: mse between shapes {} and {}'.format(pred.shape, target.shape))
    diff = pred.value - target.value
    n = diff.size

    def grad_fn(g):
        gp = (2. * g[0] / n) * diff
        return gp, -gp

    return _make(np.array([np.mean(diff ** 2)]), (pred, target), grad_fn, 'mse')

# Cell
def same_padding(n, k, s):
    """
    Output extent and (low, high) zero padding of a 'same' convolution with kernel k and stride s.
    """
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return out, total // 2, total - total // 2

# Internal Cell
def _window(offset, counts, stride):
    return (slice(None), slice(None)) + tuple(slice(o, o + stride * (n - 1) + 1, stride)
                                              for o, n in zip(offset, counts))


def _kernel_offsets(kernel_shape):
    return list(itertools.product(*[range(k) for k in kernel_shape]))

# Cell
def conv(x, W, b, stride=1):
    """
    'Same'-padded cross-correlation. x (B, C_in, *S), W (C_out, C_in, *k), b (C_out,).
    Output (B, C_out, *ceil(S / stride)).
    """
    x = as_tensor(x)
    d = x.value.ndim - 2
    kernel = W.shape[2:]
    if len(kernel) != d or W.shape[1] != x.shape[1]:
        raise ShapeError('Error: conv weight {} does not fit input {}'.format(W.shape, x.shape))

    pads = [same_padding(n, k, stride) for n, k in zip(x.shape[2:], kernel)]
    outs = [p[0] for p in pads]
    xp = np.pad(x.value, [(0, 0), (0, 0)] + [(lo, hi) for _, lo, hi in pads])
    offsets = _kernel_offsets(kernel)

    y = np.zeros((x.shape[0], W.shape[0]) + tuple(outs))
    for o in offsets:
        y += np.einsum('oc,bc...->bo...', W.value[(slice(None), slice(None)) + o], xp[_window(o, outs, stride)])
    y += b.value.reshape((1, -1) + (1,) * d)

    def grad_fn(g):
        gxp = np.zeros_like(xp)
        gW = np.zeros_like(W.value)
        for o in offsets:
            w = _window(o, outs, stride)
            wo = (slice(None), slice(None)) + o
            gW[wo] = np.einsum('bo...,bc...->oc...', g, xp[w]).sum(axis=tuple(range(2, 2 + d)))
            gxp[w] += np.einsum('oc,bo...->bc...', W.value[wo], g)
        crop = (slice(None), slice(None)) + tuple(slice(lo, lo + n) for (_, lo, _), n in zip(pads, x.shape[2:]))
        return gxp[crop], gW, g.sum(axis=(0,) + tuple(range(2, 2 + d)))

    return _make(y, (x, W, b), grad_fn, 'conv')


def conv_transpose(x, W, b, stride=1):
    """
    Adjoint of the 'same' convolution, used for upsampling. x (B, C_in, *S), W (C_in, C_out, *k), b (C_out,).
    Output (B, C_out, *(S * stride)).
    """
    x = as_tensor(x)
    d = x.value.ndim - 2
    kernel = W.shape[2:]
    if len(kernel) != d or W.shape[0] != x.shape[1]:
        raise ShapeError('Error: conv_transpose weight {} does not fit input {}'.format(W.shape, x.shape))

    ins = list(x.shape[2:])
    outs = [n * stride for n in ins]
    pads = []
    for n_out, n_in, k in zip(outs, ins, kernel):
        total = max((n_in - 1) * stride + k - n_out, 0)
        pads.append((total // 2, total - total // 2))
    offsets = _kernel_offsets(kernel)

    yp = np.zeros((x.shape[0], W.shape[1]) + tuple(n + lo + hi for n, (lo, hi) in zip(outs, pads)))
    for o in offsets:
        yp[_window(o, ins, stride)] += np.einsum('io,bi...->bo...', W.value[(slice(None), slice(None)) + o], x.value)
    crop = (slice(None), slice(None)) + tuple(slice(lo, lo + n) for (lo, _), n in zip(pads, outs))
    y = yp[crop] + b.value.reshape((1, -1) + (1,) * d)

    def grad_fn(g):
        gyp = np.zeros_like(yp)
        gyp[crop] = g
        gx = np.zeros_like(x.value)
        gW = np.zeros_like(W.value)
        for o in offsets:
            sl = gyp[_window(o, ins, stride)]
            wo = (slice(None), slice(None)) + o
            gx += np.einsum('io,bo...->bi...', W.value[wo], sl)
            gW[wo] = np.einsum('bi...,bo...->io...', x.value, sl).sum(axis=tuple(range(2, 2 + d)))
        return gx, gW, g.sum(axis=(0,) + tuple(range(2, 2 + d)))

    return _make(y, (x, W, b), grad_fn, 'conv_transpose')

# Internal Cell
def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order

# Cell
def backward(loss):
    """
    Reverse-mode pass from a shape [1] loss. Gradients are summed into every Parameter on the recorded path.
    """
    if loss.value.size != 1:
        raise ShapeError('Error: backward needs a shape [1] loss, got {}'.format(loss.shape))
    if not loss.requires_grad:
        raise GraphError('Error: backward called on a tensor with no recorded forward pass')

    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.gradient = node.gradient + g
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg


def zero_grad(params):
    for p in params:
        p.zero_grad()
