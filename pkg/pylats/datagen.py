__all__ = ['GridSpec', 'FieldSeries', 'Dataset', 'LaserPath', 'laplacian', 'diffusion_reaction_step',
           'gen_diffusion_reaction', 'swe_step', 'gen_swe_dam_break', 'laser_source', 'heat_step', 'gen_heat_laser',
           'random_raster_path', 'AUGMENTATIONS', 'augment', 'augment_dataset', 'augment_all', 'write_dataset',
           'read_dataset', 'write_split', 'read_split', 'gen_constant', 'PDE_FIELDS', 'generate_sample']

# Internal Cell
#exporti
import logging
import os
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.ndimage import correlate1d

from .container import write_container, read_container
from .shared import StabilityError, NumericalError, ContainerError

logger = logging.getLogger(__name__)

AUGMENTATIONS = ('reflect_xz', 'reflect_yz', 'rotate90_z')

# (solution fields, condition fields) each generator emits
PDE_FIELDS = {'diffusion_reaction': (('u', 'v'), ()),
              'swe': (('h',), ()),
              'heat_laser': (('T',), ('Q',)),
              'constant': (('u',), ())}

# Cell
@dataclass
class GridSpec:
    """
    Uniform cell-centred grid. `extents` are (N_x, N_y[, N_z]); `n_steps` is the number of stored frames N_t and
    `stride` the number of solver steps of size `dt` between stored frames.
    """
    extents: Tuple[int, ...]
    lengths: Tuple[float, ...]
    dt: float
    n_steps: int
    stride: int = 1

    def __post_init__(self):
        self.extents = tuple(int(n) for n in self.extents)
        self.lengths = tuple(float(x) for x in self.lengths)
        if len(self.extents) not in (2, 3):
            raise ValueError('Error: grids are 2-D or 3-D, got extents ' + str(self.extents))
        if len(self.lengths) != len(self.extents):
            raise ValueError('Error: need one physical length per axis, got {} for extents {}'.format(
                self.lengths, self.extents))
        if min(self.extents) < 4:
            raise ValueError('Error: every grid extent must be >= 4, got ' + str(self.extents))
        if self.dt <= 0 or self.n_steps < 2 or self.stride < 1:
            raise ValueError('Error: need dt > 0, n_steps >= 2 and stride >= 1')

    @property
    def dims(self):
        return len(self.extents)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.extents))

    @property
    def frame_dt(self):
        return self.dt * self.stride

    def cell_centers(self, centered=False):
        """
        Coordinates of cell centres per axis; `centered` puts the origin in the middle of the domain.
        """
        out = []
        for L, n in zip(self.lengths, self.extents):
            x = (np.arange(n) + 0.5) * (L / n)
            out.append(x - L / 2 if centered else x)
        return out

    def to_dict(self):
        return {'extents': list(self.extents), 'lengths': list(self.lengths), 'dt': self.dt,
                'n_steps': self.n_steps, 'stride': self.stride}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d['extents']), tuple(d['lengths']), d['dt'], d['n_steps'], d.get('stride', 1))

# Cell
@dataclass
class FieldSeries:
    """
    One scalar field over time, values (N_t, *extents) in float32. `role` is 'solution' or 'condition'.
    """
    name: str
    role: str
    values: np.ndarray
    units: str = ''

    def __post_init__(self):
        if self.role not in ('solution', 'condition'):
            raise ValueError('Error: field role must be solution or condition, got ' + repr(self.role))
        self.values = np.asarray(self.values, dtype=np.float32)
        if not np.all(np.isfinite(self.values)):
            raise NumericalError('Error: field ' + self.name + ' contains NaN or Inf', where=self.name)

    @property
    def n_steps(self):
        return self.values.shape[0]

# Cell
@dataclass
class Dataset:
    """
    One sample: a grid, its field series keyed by name, the generator configuration and the seed.
    """
    grid: GridSpec
    series: Dict[str, FieldSeries]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for s in self.series.values():
            if s.values.shape[1:] != self.grid.extents:
                raise ValueError('Error: field {} has grid shape {}, GridSpec says {}'.format(
                    s.name, s.values.shape[1:], self.grid.extents))

    def solutions(self):
        return [s for s in self.series.values() if s.role == 'solution']

    def conditions(self):
        return [s for s in self.series.values() if s.role == 'condition']

# Cell
def laplacian(f, spacing):
    """
    Second-order central Laplacian with no-flux walls (ghost cells copy the boundary cell).
    """
    out = np.zeros_like(f)
    for axis, h in enumerate(spacing):
        out += correlate1d(f, [1., -2., 1.], axis=axis, mode='nearest') / h ** 2
    return out

# Cell
def diffusion_reaction_step(u, v, spacing, dt, D_u, D_v, k):
    """
    One explicit Euler step of u_t = D_u lap(u) + u - u^3 - k - v, v_t = D_v lap(v) + u - v.
    """
    u_new = u + dt * (D_u * laplacian(u, spacing) + u - u ** 3 - k - v)
    v_new = v + dt * (D_v * laplacian(v, spacing) + u - v)
    return u_new, v_new

# Cell
def gen_diffusion_reaction(grid, D_u=1e-3, D_v=5e-3, k=5e-3, seed=0, u0=None, v0=None):
    """
    Generate (u, v) for the two-species diffusion-reaction system from i.i.d. standard normal initial fields.
    """
    cfl = max(D_u, D_v) * grid.dt * sum(1. / h ** 2 for h in grid.spacing)
    if cfl > 0.25:
        raise StabilityError('Error: diffusion-reaction step is unstable, max(D)*dt*sum(1/dx^2) = {:.4g} > 0.25'
                             .format(cfl), number=cfl)

    rng = np.random.default_rng(seed)
    u = rng.standard_normal(grid.extents) if u0 is None else np.array(u0, dtype=np.float64)
    v = rng.standard_normal(grid.extents) if v0 is None else np.array(v0, dtype=np.float64)

    U = np.empty((grid.n_steps,) + grid.extents)
    V = np.empty_like(U)
    U[0], V[0] = u, v
    for n in range(1, grid.n_steps):
        for _ in range(grid.stride):
            u, v = diffusion_reaction_step(u, v, grid.spacing, grid.dt, D_u, D_v, k)
        U[n], V[n] = u, v

    return FieldSeries('u', 'solution', U), FieldSeries('v', 'solution', V)

# Internal Cell
def _reflect_pad(Q, axis):
    # one ghost layer along `axis`; the wall-normal momentum changes sign
    pad = [(0, 0)] + [(1, 1) if a == axis else (0, 0) for a in range(Q.ndim - 1)]
    P = np.pad(Q, pad, mode='edge')
    for end in (0, -1):
        idx = [1 + axis] + [slice(None)] * (Q.ndim - 1)
        idx[1 + axis] = end
        P[tuple(idx)] *= -1.
    return P


def _swe_flux(Q, axis, g):
    h = Q[0]
    un = Q[1 + axis] / h
    F = Q * un
    F[1 + axis] += 0.5 * g * h * h
    return F

# Cell
def swe_step(Q, spacing, dt, g=1.0):
    """
    One Lax-Friedrichs finite-volume step of the 2-D shallow-water system. Q = (h, hu, hv), reflective walls.
    """
    out = Q.copy()
    for axis, dx in enumerate(spacing):
        P = _reflect_pad(Q, axis)
        F = _swe_flux(P, axis, g)
        lo = [slice(None)] * Q.ndim
        hi = [slice(None)] * Q.ndim
        lo[1 + axis], hi[1 + axis] = slice(0, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        flux = 0.5 * (F[lo] + F[hi]) - (dx / (4. * dt)) * (P[hi] - P[lo])
        out -= (dt / dx) * (flux[hi] - flux[lo])
    return out


def _swe_cfl(Q, spacing, dt, g):
    h = Q[0]
    c = np.sqrt(g * h)
    speed = max(np.max(np.abs(Q[1] / h) + c), np.max(np.abs(Q[2] / h) + c))
    return speed * dt / min(spacing)

# Cell
def gen_swe_dam_break(grid, r_c=None, seed=0, g=1.0):
    """
    Radial dam break: h = 2 inside radius r_c of the domain centre, 1 outside, at rest. Only h is recorded.
    When r_c is None it is drawn from U(0.3, 0.7) with `seed`.
    """
    if grid.dims != 2:
        raise ValueError('Error: the shallow-water generator is 2-D, got extents ' + str(grid.extents))
    if r_c is None:
        r_c = float(stats.uniform(loc=0.3, scale=0.4).rvs(random_state=np.random.default_rng(seed)))
    if not 0 < r_c < min(grid.lengths) / 2:
        raise ValueError('Error: r_c must lie in (0, {}), got {}'.format(min(grid.lengths) / 2, r_c))

    x, y = grid.cell_centers(centered=True)
    r = np.sqrt(x[:, None] ** 2 + y[None, :] ** 2)
    Q = np.zeros((3,) + grid.extents)
    Q[0] = np.where(r < r_c, 2.0, 1.0)

    H = np.empty((grid.n_steps,) + grid.extents)
    H[0] = Q[0]
    for n in range(1, grid.n_steps):
        for _ in range(grid.stride):
            cfl = _swe_cfl(Q, grid.spacing, grid.dt, g)
            if cfl > 1.:
                raise StabilityError('Error: shallow-water CFL number {:.4g} > 1 at frame {}'.format(cfl, n),
                                     number=cfl)
            Q = swe_step(Q, grid.spacing, grid.dt, g)
            if np.min(Q[0]) <= 0:
                raise NumericalError('Error: water height became non-positive at frame ' + str(n), where=n)
        H[n] = Q[0]

    return FieldSeries('h', 'solution', H), r_c

# Cell
@dataclass
class LaserPath:
    """
    Raster motion of a Gaussian laser spot on the top (max-z) surface.

    `waypoints` are (frame index, x, y) triples in time order; the spot moves linearly between them.
    Material constants `conductivity`, `density`, `heat_capacity` and the power `q0` stay fixed across samples.
    """
    waypoints: List[Tuple[float, float, float]]
    q0: float = 50.0
    sigma: float = 1.5
    conductivity: float = 1.0
    density: float = 1.0
    heat_capacity: float = 1.0

    def __post_init__(self):
        self.waypoints = [tuple(float(c) for c in w) for w in self.waypoints]
        if len(self.waypoints) == 0:
            raise ValueError('Error: a laser path needs at least one waypoint')
        times = [w[0] for w in self.waypoints]
        if any(b < a for a, b in zip(times[:-1], times[1:])):
            raise ValueError('Error: laser waypoints must be in time order, got times ' + str(times))
        if self.q0 < 0 or self.sigma <= 0:
            raise ValueError('Error: laser power must be >= 0 and spot radius > 0')

    @property
    def alpha(self):
        return self.conductivity / (self.density * self.heat_capacity)

    def check_inside(self, lengths):
        for i, (t, x, y) in enumerate(self.waypoints):
            if not (0 <= x <= lengths[0] and 0 <= y <= lengths[1]):
                raise ValueError('Error: laser path leaves the domain at segment {} (t={}, x={}, y={}), '
                                 'domain is {} x {}'.format(i, t, x, y, lengths[0], lengths[1]))

    def position(self, t):
        w = np.array(self.waypoints)
        return float(np.interp(t, w[:, 0], w[:, 1])), float(np.interp(t, w[:, 0], w[:, 2]))

    def transformed(self, op, lengths):
        """
        The path image under one of the augmentation ops.
        """
        Lx, Ly = lengths[0], lengths[1]
        if op == 'reflect_xz':
            pts = [(t, x, Ly - y) for t, x, y in self.waypoints]
        elif op == 'reflect_yz':
            pts = [(t, Lx - x, y) for t, x, y in self.waypoints]
        elif op == 'rotate90_z':
            pts = [(t, Ly - y, x) for t, x, y in self.waypoints]
        else:
            raise ValueError('Error: unknown augmentation ' + repr(op))
        d = asdict(self)
        d['waypoints'] = pts
        return LaserPath(**d)

    def to_dict(self):
        d = asdict(self)
        d['waypoints'] = [list(w) for w in self.waypoints]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

# Cell
def laser_source(grid, path, t):
    """
    Source field Q at (fractional) frame time t: a Gaussian spot deposited on the top z-layer.
    """
    x, y = grid.cell_centers()[:2]
    xc, yc = path.position(t)
    spot = path.q0 * np.exp(-((x[:, None] - xc) ** 2 + (y[None, :] - yc) ** 2) / (2. * path.sigma ** 2))
    Q = np.zeros(grid.extents)
    Q[..., -1] = spot
    return Q

# Cell
def heat_step(T, Q, spacing, dt, alpha, rho_c):
    """
    One explicit step of T_t = alpha lap(T) + Q / (rho C) with adiabatic walls.
    """
    return T + dt * (alpha * laplacian(T, spacing) + Q / rho_c)

# Cell
def gen_heat_laser(grid, path, T0=0.0):
    """
    Temperature T (solution) and laser source Q (condition) for a laser moving along `path` over a 3-D block.
    """
    if grid.dims != 3:
        raise ValueError('Error: the laser heat generator is 3-D, got extents ' + str(grid.extents))
    path.check_inside(grid.lengths)
    number = path.alpha * grid.dt * sum(1. / h ** 2 for h in grid.spacing)
    if number > 0.5:
        raise StabilityError('Error: heat step is unstable, alpha*dt*sum(1/dx^2) = {:.4g} > 0.5'.format(number),
                             number=number)

    rho_c = path.density * path.heat_capacity
    T = np.full(grid.extents, float(T0))
    temps = np.empty((grid.n_steps,) + grid.extents)
    sources = np.empty_like(temps)
    temps[0], sources[0] = T, laser_source(grid, path, 0.)
    for n in range(1, grid.n_steps):
        for m in range(grid.stride):
            t = (n - 1) + m / grid.stride
            T = heat_step(T, laser_source(grid, path, t), grid.spacing, grid.dt, path.alpha, rho_c)
        temps[n], sources[n] = T, laser_source(grid, path, float(n))

    return FieldSeries('T', 'solution', temps, 'K'), FieldSeries('Q', 'condition', sources, 'W/m^3')

# Cell
def random_raster_path(grid, rng, q0=50.0, sigma=1.5, conductivity=1.0, density=1.0, heat_capacity=1.0,
                       margin=0.15):
    """
    A snake-shaped raster with 2-4 passes along a random axis, timed so the spot covers the path at constant
    speed over the stored frames.
    """
    Lx, Ly = grid.lengths[0], grid.lengths[1]
    n_pass = int(rng.integers(2, 5))
    along_x = bool(rng.integers(0, 2))
    lo = margin + 0.1 * rng.random()
    offsets = np.linspace(lo, 1. - lo, n_pass)
    start, end = margin, 1. - margin

    pts = []
    for i, o in enumerate(offsets):
        a, b = (start, end) if i % 2 == 0 else (end, start)
        pts += [(a, o), (b, o)]
    pts = [(p * Lx, q * Ly) if along_x else (q * Lx, p * Ly) for p, q in pts]

    seg = np.r_[0., np.cumsum(np.hypot(np.diff([p[0] for p in pts]), np.diff([p[1] for p in pts])))]
    times = seg / seg[-1] * (grid.n_steps - 1)
    return LaserPath([(t, x, y) for t, (x, y) in zip(times, pts)], q0=q0, sigma=sigma, conductivity=conductivity,
                     density=density, heat_capacity=heat_capacity)

# Cell
def augment(series, op):
    """
    Apply one augmentation to every field of `series` (a dict of FieldSeries). Axes are (t, x, y[, z]).
    'reflect_xz' mirrors y, 'reflect_yz' mirrors x, 'rotate90_z' turns the horizontal plane by 90 degrees.
    """
    out = {}
    for name, s in series.items():
        v = s.values
        if op == 'reflect_xz':
            w = np.flip(v, axis=2)
        elif op == 'reflect_yz':
            w = np.flip(v, axis=1)
        elif op == 'rotate90_z':
            if v.shape[1] != v.shape[2]:
                raise ValueError('Error: rotate90_z needs N_x == N_y, got {} x {}'.format(v.shape[1], v.shape[2]))
            w = np.rot90(v, k=1, axes=(1, 2))
        else:
            raise ValueError('Error: unknown augmentation {!r}, expected one of {}'.format(op, AUGMENTATIONS))
        out[name] = FieldSeries(s.name, s.role, np.ascontiguousarray(w), s.units)
    return out


def augment_dataset(dataset, op):
    """
    Augment a whole sample; a recorded laser path is moved along with the fields.
    """
    series = augment(dataset.series, op)
    config = dict(dataset.config)
    if 'laser_path' in config:
        config['laser_path'] = LaserPath.from_dict(config['laser_path']).transformed(op, dataset.grid.lengths).to_dict()
    config['augmentations'] = list(config.get('augmentations', [])) + [op]
    return Dataset(dataset.grid, series, config, dataset.seed)


def augment_all(datasets):
    """
    Identity plus the three augmentations of every sample: 12 simulations give 48 samples.
    """
    out = []
    for ds in datasets:
        out.append(ds)
        out += [augment_dataset(ds, op) for op in AUGMENTATIONS]
    return out

# Cell
def write_dataset(dataset, path):
    meta = {'kind': 'dataset',
            'grid': dataset.grid.to_dict(),
            'fields': [{'name': s.name, 'role': s.role, 'units': s.units} for s in dataset.series.values()],
            'config': dataset.config,
            'seed': int(dataset.seed)}
    write_container(path, meta, [(s.name, s.values) for s in dataset.series.values()])


def read_dataset(path):
    meta, arrays = read_container(path)
    if meta.get('kind') != 'dataset':
        raise ContainerError('Error: {} holds a {!r}, not a dataset'.format(path, meta.get('kind')))
    grid = GridSpec.from_dict(meta['grid'])
    series = {f['name']: FieldSeries(f['name'], f['role'], arrays[f['name']], f.get('units', ''))
              for f in meta['fields']}
    return Dataset(grid, series, meta.get('config', {}), meta.get('seed', 0))

# Cell
def write_split(datasets, directory):
    """
    Write one container per sample plus a manifest.csv describing them.
    """
    os.makedirs(directory, exist_ok=True)
    rows = []
    for i, ds in enumerate(datasets):
        fname = 'sample_{:04d}.cmls'.format(i)
        write_dataset(ds, os.path.join(directory, fname))
        rows.append({'file': fname, 'seed': ds.seed, 'pde': ds.config.get('pde', ''),
                     'fields': ' '.join(ds.series), 'n_steps': ds.grid.n_steps,
                     'extents': 'x'.join(str(n) for n in ds.grid.extents),
                     'augmentations': ' '.join(ds.config.get('augmentations', []))})
    manifest = pd.DataFrame(rows)
    manifest.to_csv(os.path.join(directory, 'manifest.csv'), index=False)
    return manifest


def read_split(directory):
    manifest = pd.read_csv(os.path.join(directory, 'manifest.csv'))
    return [read_dataset(os.path.join(directory, f)) for f in manifest['file']]

# Cell
def gen_constant(grid, seed=0, n_modes=3, amplitude=1.0):
    """
    A smooth random field held fixed in time: a sum of `n_modes` cosine modes with seeded wavenumbers,
    phases and weights.
    """
    rng = np.random.default_rng(seed)
    coords = np.meshgrid(*grid.cell_centers(), indexing='ij')
    u = np.zeros(grid.extents)
    for _ in range(n_modes):
        arg = rng.uniform(0., 2. * np.pi)
        for x, L in zip(coords, grid.lengths):
            arg = arg + 2. * np.pi * rng.integers(0, 3) * x / L
        u += amplitude * rng.uniform(0.5, 1.) * np.cos(arg)
    return FieldSeries('u', 'solution', np.broadcast_to(u, (grid.n_steps,) + grid.extents))

# Cell
def generate_sample(pde, grid, params, seed):
    """
    Generate one sample of `pde` in PDE_FIELDS with generator keyword `params`.
    """
    params = dict(params)
    config = {'pde': pde, 'params': params}
    if pde == 'diffusion_reaction':
        u, v = gen_diffusion_reaction(grid, seed=seed, **params)
        series = {'u': u, 'v': v}
    elif pde == 'swe':
        h, r_c = gen_swe_dam_break(grid, seed=seed, **params)
        config['r_c'] = r_c
        series = {'h': h}
    elif pde == 'heat_laser':
        T0 = params.pop('T0', 0.0)
        path = random_raster_path(grid, np.random.default_rng(seed), **params)
        T, Q = gen_heat_laser(grid, path, T0=T0)
        config['laser_path'] = path.to_dict()
        series = {'T': T, 'Q': Q}
    elif pde == 'constant':
        series = {'u': gen_constant(grid, seed=seed, **params)}
    else:
        raise ValueError('Error: unknown pde ' + repr(pde))
    logger.info('generated %s sample seed=%d extents=%s n_steps=%d', pde, seed, grid.extents, grid.n_steps)
    return Dataset(grid, series, config, seed)
