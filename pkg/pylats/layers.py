__all__ = ['LayerSpec', 'Layer', 'Sequential', 'mlp']

# Internal Cell
#exporti
from dataclasses import dataclass, asdict, field
from typing import Tuple

import numpy as np

from . import tensor as T
from .shared import ShapeError

LAYER_KINDS = ('dense', 'conv', 'conv_transpose', 'activation', 'reshape')

# Cell
@dataclass
class LayerSpec:
    """
    Declarative description of one layer. Only the fields of the given kind are used:

    - dense: in_width, out_width
    - conv / conv_transpose: in_channels, out_channels, kernel, stride, dims
    - activation: activation in {'relu', 'tanh', 'identity'}
    - reshape: shape (per-sample target shape)
    """
    kind: str
    id: str
    in_width: int = 0
    out_width: int = 0
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 1
    stride: int = 1
    dims: int = 2
    activation: str = 'identity'
    shape: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError('Error: layer {} has unknown kind {}'.format(self.id, self.kind))
        if self.kernel < 1 or self.stride < 1:
            raise ValueError('Error: layer {} needs kernel >= 1 and stride >= 1'.format(self.id))
        self.shape = tuple(int(s) for s in self.shape)

    def to_dict(self):
        d = asdict(self)
        d['shape'] = list(self.shape)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d['shape'] = tuple(d.get('shape', ()))
        return cls(**d)

# Cell
class Layer:
    """
    One layer built from a LayerSpec. Weights are drawn from `rng` (Glorot uniform), biases start at zero.
    """

    def __init__(self, spec, rng=None):
        self.spec = spec
        rng = rng if rng is not None else np.random.default_rng(0)
        s = spec
        if s.kind == 'dense':
            a = np.sqrt(6. / (s.in_width + s.out_width))
            self.W = T.Parameter(rng.uniform(-a, a, (s.out_width, s.in_width)), s.id + '.weight')
            self.b = T.Parameter(np.zeros(s.out_width), s.id + '.bias')
        elif s.kind in ('conv', 'conv_transpose'):
            fan = s.kernel ** s.dims
            a = np.sqrt(6. / ((s.in_channels + s.out_channels) * fan))
            if s.kind == 'conv':
                wshape = (s.out_channels, s.in_channels) + (s.kernel,) * s.dims
            else:
                wshape = (s.in_channels, s.out_channels) + (s.kernel,) * s.dims
            self.W = T.Parameter(rng.uniform(-a, a, wshape), s.id + '.weight')
            self.b = T.Parameter(np.zeros(s.out_channels), s.id + '.bias')

    def params(self):
        if self.spec.kind in ('dense', 'conv', 'conv_transpose'):
            return [self.W, self.b]
        return []

    def input_ok(self, in_shape):
        s = self.spec
        if s.kind == 'dense':
            return tuple(in_shape) == (s.in_width,)
        if s.kind in ('conv', 'conv_transpose'):
            return len(in_shape) == s.dims + 1 and in_shape[0] == s.in_channels
        if s.kind == 'reshape':
            return int(np.prod(in_shape)) == int(np.prod(s.shape))
        return True

    def output_shape(self, in_shape):
        """
        Per-sample output shape for a per-sample input shape (no batch axis).
        """
        s = self.spec
        in_shape = tuple(in_shape)
        if not self.input_ok(in_shape):
            raise ShapeError('Error: layer {} ({}) cannot take input of shape {}'.format(s.id, s.kind, in_shape))
        if s.kind == 'dense':
            return (s.out_width,)
        if s.kind == 'conv':
            return (s.out_channels,) + tuple(T.same_padding(n, s.kernel, s.stride)[0] for n in in_shape[1:])
        if s.kind == 'conv_transpose':
            return (s.out_channels,) + tuple(n * s.stride for n in in_shape[1:])
        if s.kind == 'reshape':
            return s.shape
        return in_shape

    def forward(self, x):
        """
        Apply the layer. Dense layers map the last axis and accept any leading axes; conv layers take a
        batch (B, C, *S) or a single sample (C, *S); reshape layers need a leading batch axis.
        """
        s = self.spec
        x = T.as_tensor(x)
        if s.kind == 'activation':
            return T.activation(x, s.activation)

        unbatched = False
        if s.kind == 'dense':
            lead, expected = x.shape[:-1], self.output_shape(x.shape[-1:])
            y = T.linear(x, self.W, self.b)
        elif s.kind in ('conv', 'conv_transpose'):
            if x.value.ndim == s.dims + 1:
                unbatched = True
                x = T.reshape(x, (1,) + x.shape)
            if x.value.ndim != s.dims + 2:
                raise ShapeError('Error: layer {} ({}) cannot take input of shape {}'.format(s.id, s.kind, x.shape))
            lead, expected = x.shape[:1], self.output_shape(x.shape[1:])
            if s.kind == 'conv':
                y = T.conv(x, self.W, self.b, s.stride)
            else:
                y = T.conv_transpose(x, self.W, self.b, s.stride)
        else:
            lead, expected = x.shape[:1], self.output_shape(x.shape[1:])
            y = T.reshape(x, lead + s.shape)

        if y.shape != lead + expected:
            raise ShapeError('Error: layer {} produced {} but declares {}'.format(s.id, y.shape[len(lead):], expected))
        if unbatched:
            y = T.reshape(y, y.shape[1:])
        return y

# Cell
class Sequential:
    """
    A stack of layers whose shapes are checked once, at construction, against `in_shape`.
    """

    def __init__(self, specs, in_shape, rng=None):
        self.specs = list(specs)
        self.layers = [Layer(s, rng) for s in self.specs]
        self.in_shape = tuple(in_shape)
        shape = self.in_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.out_shape = shape

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x):
        x = T.as_tensor(x)
        if x.shape[-len(self.in_shape):] != self.in_shape:
            raise ShapeError('Error: {} expects samples of shape {}, got {}'.format(
                self.specs[0].id if self.specs else 'sequential', self.in_shape, x.shape))
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def to_dict(self):
        return {'in_shape': list(self.in_shape), 'layers': [s.to_dict() for s in self.specs]}

    @classmethod
    def from_dict(cls, d):
        return cls([LayerSpec.from_dict(s) for s in d['layers']], tuple(d['in_shape']))

# Cell
def mlp(prefix, in_width, hidden, out_width, activation='relu', rng=None, final_activation='identity'):
    """
    Dense network in_width -> hidden[0] -> ... -> out_width.
    """
    widths = [in_width] + list(hidden)
    specs = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        specs.append(LayerSpec('dense', '{}.dense{}'.format(prefix, i), in_width=a, out_width=b))
        specs.append(LayerSpec('activation', '{}.act{}'.format(prefix, i), activation=activation))
    specs.append(LayerSpec('dense', '{}.dense{}'.format(prefix, len(hidden)), in_width=widths[-1], out_width=out_width))
    if final_activation != 'identity':
        specs.append(LayerSpec('activation', '{}.out_act'.format(prefix), activation=final_activation))
    return Sequential(specs, (in_width,), rng)
