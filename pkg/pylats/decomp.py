__all__ = ['SENTINEL', 'POLICY_MODES', 'SubdomainLattice', 'NeighborPolicy', 'NormStats', 'decompose', 'reassemble',
           'decompose_series', 'reassemble_series', 'lattice_shape', 'neighbor_ids', 'neighbor_table',
           'compute_stats', 'normalize', 'denormalize']

# Internal Cell
#exporti
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .shared import ShapeError

logger = logging.getLogger(__name__)

# Neighbor id standing for "feed a zero latent"
SENTINEL = -1
POLICY_MODES = ('zero', 'replicate', 'periodic')

# Cell
@dataclass
class SubdomainLattice:
    """
    A field split into uniform patches. `patches` has shape lattice + (p,)*d, laid out row-major over (i, j[, k]).
    `present` marks which patches are filled; it is None for a complete lattice.
    """
    patches: np.ndarray
    p: int
    field: str = ''
    t: int = 0
    present: np.ndarray = None

    @property
    def dims(self):
        return self.patches.ndim // 2

    @property
    def shape(self):
        return self.patches.shape[:self.dims]

    @property
    def count(self):
        return int(np.prod(self.shape))

    def flat(self):
        """Patches as (N, p, ..., p) in row-major lattice order."""
        return self.patches.reshape((self.count,) + self.patches.shape[self.dims:])

# Internal Cell
def _check_divisible(extents, p):
    for axis, n in enumerate(extents):
        if n % p != 0:
            raise ShapeError('Error: grid extent {} on axis {} is not divisible by patch size {} (remainder {})'
                             .format(n, axis, p, n % p))


def _split_axes(d):
    # (n0, p, n1, p, ...) -> (n0, n1, ..., p, p, ...)
    return tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2))


def lattice_shape(extents, p):
    _check_divisible(extents, p)
    return tuple(n // p for n in extents)

# Cell
def decompose(field, p, name='', t=0):
    """
    Split a 2-D or 3-D field into patches of extent p per axis.
    """
    field = np.asarray(field)
    d = field.ndim
    lat = lattice_shape(field.shape, p)
    interleaved = field.reshape(tuple(x for n in lat for x in (n, p)))
    return SubdomainLattice(interleaved.transpose(_split_axes(d)).copy(), p, name, t)

# Cell
def reassemble(lattice):
    """
    Put the patches back into the global field; the inverse of `decompose`.
    """
    if lattice.present is not None and not np.all(lattice.present):
        missing = [tuple(int(i) for i in c) for c in np.argwhere(~lattice.present)]
        raise ShapeError('Error: cannot reassemble {}, patches missing at lattice coordinates {}'.format(
            lattice.field or 'field', missing[:8]))
    d = lattice.dims
    inv = np.argsort(_split_axes(d))
    interleaved = lattice.patches.transpose(inv)
    return interleaved.reshape(tuple(n * lattice.p for n in lattice.shape))

# Cell
def decompose_series(values, p):
    """
    Decompose a whole series (N_t, *extents) into (N_t, N, p, ..., p), lattice flattened row-major.
    """
    values = np.asarray(values)
    d = values.ndim - 1
    lat = lattice_shape(values.shape[1:], p)
    interleaved = values.reshape((values.shape[0],) + tuple(x for n in lat for x in (n, p)))
    axes = (0,) + tuple(a + 1 for a in _split_axes(d))
    return interleaved.transpose(axes).reshape((values.shape[0], int(np.prod(lat))) + (p,) * d)


def reassemble_series(patches, lattice):
    """
    Inverse of `decompose_series` for a lattice shape `lattice`.
    """
    patches = np.asarray(patches)
    d = len(lattice)
    p = patches.shape[-1]
    n_t = patches.shape[0]
    blocked = patches.reshape((n_t,) + tuple(lattice) + (p,) * d)
    inv = np.argsort((0,) + tuple(a + 1 for a in _split_axes(d)))
    return blocked.transpose(inv).reshape((n_t,) + tuple(n * p for n in lattice))

# Cell
@dataclass
class NeighborPolicy:
    """
    How out-of-range neighbors are resolved, one mode per axis: 'zero', 'replicate' or 'periodic'.
    """
    modes: Tuple[str, ...]

    def __post_init__(self):
        self.modes = tuple(self.modes)
        for m in self.modes:
            if m not in POLICY_MODES:
                raise ValueError('Error: neighbor mode must be one of {}, got {!r}'.format(POLICY_MODES, m))

    @classmethod
    def uniform(cls, mode, dims):
        return cls((mode,) * dims)

    @classmethod
    def parse(cls, text, dims):
        """
        'zero' applies to every axis; 'periodic,zero' gives one mode per axis.
        """
        parts = [s.strip() for s in str(text).split(',') if s.strip()]
        if len(parts) == 1:
            return cls.uniform(parts[0], dims)
        if len(parts) != dims:
            raise ValueError('Error: neighbor policy {!r} names {} axes, lattice has {}'.format(text, len(parts), dims))
        return cls(tuple(parts))

    def __str__(self):
        return ','.join(self.modes)

# Cell
def neighbor_ids(coords, shape, policy):
    """
    Neighbors of the patch at `coords` on a lattice of extents `shape`, in the order [-x, +x, -y, +y(, -z, +z)].

    Returns (neighbors, center) with flat row-major ids. Missing neighbors are SENTINEL under 'zero',
    the center id under 'replicate' and the wrapped id under 'periodic'.
    """
    coords = tuple(int(c) for c in coords)
    shape = tuple(shape)
    if len(policy.modes) != len(shape):
        raise ValueError('Error: policy has {} axes, lattice has {}'.format(len(policy.modes), len(shape)))
    if any(not 0 <= c < n for c, n in zip(coords, shape)):
        raise IndexError('Error: coordinates {} outside lattice {}'.format(coords, shape))

    center = int(np.ravel_multi_index(coords, shape))
    out = []
    for axis, mode in enumerate(policy.modes):
        for step in (-1, 1):
            c = list(coords)
            c[axis] += step
            if 0 <= c[axis] < shape[axis]:
                out.append(int(np.ravel_multi_index(c, shape)))
            elif mode == 'periodic':
                c[axis] %= shape[axis]
                out.append(int(np.ravel_multi_index(c, shape)))
            elif mode == 'replicate':
                out.append(center)
            else:
                out.append(SENTINEL)
    return out, center

# Cell
def neighbor_table(shape, policy):
    """
    (N, 2d+1) table of fusion inputs per subdomain: center first, then the 2d neighbors of `neighbor_ids`.
    """
    rows = []
    for coords in np.ndindex(*shape):
        nbrs, center = neighbor_ids(coords, shape, policy)
        rows.append([center] + nbrs)
    return np.array(rows, dtype=np.int64)

# Cell
@dataclass
class NormStats:
    """
    z-score statistics of one field over the training split. `constant` flags a field whose std was clamped to 1.
    """
    field: str
    mean: float
    std: float
    constant: bool = False

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError('Error: NormStats std must be positive, got ' + str(self.std))

    def to_dict(self):
        return {'field': self.field, 'mean': float(self.mean), 'std': float(self.std), 'constant': bool(self.constant)}

    @classmethod
    def from_dict(cls, d):
        return cls(d['field'], d['mean'], d['std'], d.get('constant', False))


def compute_stats(values, field=''):
    values = np.asarray(values, dtype=np.float64)
    if np.ptp(values) == 0:
        logger.warning('field %s is constant, std clamped to 1', field or '?')
        return NormStats(field, float(values.flat[0]), 1.0, constant=True)
    return NormStats(field, float(values.mean()), float(values.std()))

# Cell
def normalize(values, stats):
    return (np.asarray(values, dtype=np.float64) - stats.mean) / stats.std


def denormalize(values, stats):
    return np.asarray(values, dtype=np.float64) * stats.std + stats.mean
