__all__ = ['BoundaryDirective', 'RolloutPlan', 'RolloutResult', 'rollout', 'impose_periodic', 'impose_dirichlet',
           'plan_from_dataset', 'result_to_dataset', 'write_ppm', 'dump_ppm_frames']

# Internal Cell
#exporti
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import tensor as T
from .autoencoder import LatentFrame
from .datagen import Dataset, FieldSeries, GridSpec
from .decomp import decompose_series, reassemble_series, lattice_shape
from .shared import ShapeError, NumericalError

logger = logging.getLogger(__name__)

# Cell
@dataclass
class BoundaryDirective:
    """
    Boundary treatment of one lattice axis: 'none', 'periodic' or 'dirichlet'. A Dirichlet directive holds
    the fixed boundary value per solution field, either a number (constant patch) or a full patch.
    """
    axis: int
    kind: str = 'none'
    values: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ('none', 'periodic', 'dirichlet'):
            raise ValueError('Error: boundary kind must be none, periodic or dirichlet, got ' + repr(self.kind))

# Cell
@dataclass
class RolloutPlan:
    """
    What to roll out: the first `th` frames of every solution field (raw values, (n, *extents)), condition
    series covering all th + horizon frames, the number of steps to predict and which frames to decode.
    `decode` holds absolute frame indices; None decodes every frame.
    """
    initial: Dict[str, np.ndarray]
    horizon: int
    conditions: Dict[str, np.ndarray] = field(default_factory=dict)
    boundary: List[BoundaryDirective] = field(default_factory=list)
    decode: Optional[List[int]] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError('Error: rollout horizon must be >= 1, got ' + str(self.horizon))

# Cell
@dataclass
class RolloutResult:
    """
    Decoded fields at `times` (per field (len(times), *extents)), the full latent trajectory
    (th + horizon, N, sum l_s), the lattice shape and the decoder calls made while stepping.
    """
    fields: Dict[str, np.ndarray]
    times: List[int]
    latents: np.ndarray
    lattice: tuple
    decode_calls_in_loop: int = 0

# Cell
def impose_periodic(frame, axis):
    """
    Copy the last lattice slab on `axis` onto the first.
    """
    lat = frame.latents
    if not 0 <= axis < lat.ndim - 1:
        raise ValueError('Error: axis {} outside a {}-D lattice'.format(axis, lat.ndim - 1))
    if lat.shape[axis] < 2:
        raise ValueError('Error: periodic imposition needs lattice extent >= 2 on axis {}, got {}'.format(
            axis, lat.shape[axis]))
    out = lat.copy()
    first = [slice(None)] * lat.ndim
    last = [slice(None)] * lat.ndim
    first[axis], last[axis] = 0, -1
    out[tuple(first)] = lat[tuple(last)]
    return LatentFrame(out, frame.field, frame.t)


def impose_dirichlet(frame, axis, eta0):
    """
    Set the first and last lattice slabs on `axis` to the boundary latent `eta0`.
    """
    lat = frame.latents
    eta0 = np.asarray(eta0, dtype=np.float64)
    if eta0.shape != (lat.shape[-1],):
        raise ShapeError('Error: boundary latent has shape {}, frame latents have length {}'.format(
            eta0.shape, lat.shape[-1]))
    if not 0 <= axis < lat.ndim - 1:
        raise ValueError('Error: axis {} outside a {}-D lattice'.format(axis, lat.ndim - 1))
    out = lat.copy()
    for end in (0, -1):
        idx = [slice(None)] * lat.ndim
        idx[axis] = end
        out[tuple(idx)] = eta0
    return LatentFrame(out, frame.field, frame.t)

# Internal Cell
def _boundary_latents(autoencoders, directive):
    etas = {}
    for name, value in directive.values.items():
        ae = autoencoders[name]
        patch = np.asarray(value, dtype=np.float64)
        if patch.ndim == 0:
            patch = np.full(ae.patch_shape, float(patch))
        etas[name] = ae.encode_patches(patch)
    return etas


def _check_plan(autoencoders, model, plan):
    names = [n for n, _ in model.solution_fields]
    for name, l in model.solution_fields + model.condition_fields:
        if name not in autoencoders:
            raise ShapeError('Error: no autoencoder for field ' + name)
        if autoencoders[name].latent != l:
            raise ShapeError('Error: autoencoder {} has latent {}, integrator expects {}'.format(
                name, autoencoders[name].latent, l))
        if autoencoders[name].dims != model.dims:
            raise ShapeError('Error: autoencoder {} is {}-D, integrator {}-D'.format(name, autoencoders[name].dims, model.dims))
    ps = {autoencoders[n].p for n, _ in model.solution_fields + model.condition_fields}
    if len(ps) != 1:
        raise ShapeError('Error: all autoencoders must share one patch size, got ' + str(sorted(ps)))
    p = ps.pop()

    extents = None
    for name in names:
        if name not in plan.initial:
            raise ShapeError('Error: plan has no initial frames for solution field ' + name)
        init = np.asarray(plan.initial[name])
        if init.shape[0] < model.th:
            raise ShapeError('Error: field {} has {} initial frames, history needs th={}'.format(
                name, init.shape[0], model.th))
        if extents is not None and init.shape[1:] != extents:
            raise ShapeError('Error: solution fields have different grid extents')
        extents = init.shape[1:]
    if len(extents) != model.dims:
        raise ShapeError('Error: grid {} is not {}-D'.format(extents, model.dims))
    lattice = lattice_shape(extents, p)

    total = model.th + plan.horizon
    for name, _ in model.condition_fields:
        if name not in plan.conditions:
            raise ShapeError('Error: plan has no condition series for field ' + name)
        c = np.asarray(plan.conditions[name])
        if c.shape[0] < total or c.shape[1:] != extents:
            raise ShapeError('Error: condition {} must cover {} frames on grid {}, got shape {}'.format(
                name, total, extents, c.shape))

    for d in plan.boundary:
        if not 0 <= d.axis < model.dims:
            raise ValueError('Error: boundary axis {} outside a {}-D lattice'.format(d.axis, model.dims))
        if d.kind == 'periodic' and lattice[d.axis] < 2:
            raise ValueError('Error: periodic boundary needs lattice extent >= 2 on axis ' + str(d.axis))
        if d.kind == 'dirichlet':
            for name in d.values:
                if name not in names:
                    raise ShapeError('Error: Dirichlet value given for {}, which is not a solution field'.format(name))

    decode = list(range(total)) if plan.decode is None else sorted(int(t) for t in plan.decode)
    if any(not 0 <= t < total for t in decode):
        raise ValueError('Error: decode steps must lie in [0, {}), got {}'.format(total, decode))
    return p, extents, lattice, decode


def _impose(z, lattice, model, plan, etas):
    # z (N, sum l_s) -> boundary directives applied per solution field
    out, off = z.copy(), 0
    for name, l in model.solution_fields:
        frame = LatentFrame(z[:, off:off + l].reshape(tuple(lattice) + (l,)), name)
        for d in plan.boundary:
            if d.kind == 'periodic':
                frame = impose_periodic(frame, d.axis)
            elif d.kind == 'dirichlet' and name in etas[d.axis]:
                frame = impose_dirichlet(frame, d.axis, etas[d.axis][name])
        out[:, off:off + l] = frame.latents.reshape(-1, l)
        off += l
    return out

# Cell
def rollout(autoencoders, model, plan):
    """
    Encode the history, step the latents forward `plan.horizon` times without leaving latent space, then
    decode the requested frames.

    Every plan inconsistency is reported before the first step. A non-finite latent aborts with the index of
    the offending frame.
    """
    p, extents, lattice, decode = _check_plan(autoencoders, model, plan)
    th, total = model.th, model.th + plan.horizon
    table = model.neighbor_table(lattice)
    etas = {d.axis: _boundary_latents(autoencoders, d) for d in plan.boundary if d.kind == 'dirichlet'}

    def encode_fields(fields, series, t0, t1):
        blocks = [autoencoders[n].encode_patches(decompose_series(np.asarray(series[n])[t0:t1], p)) for n, _ in fields]
        return np.concatenate(blocks, axis=-1)

    traj = np.empty((total, int(np.prod(lattice)), model.solution_width))
    traj[:th] = encode_fields(model.solution_fields, plan.initial, 0, th)
    cond = encode_fields(model.condition_fields, plan.conditions, 0, total) if model.condition_fields else None

    def state(t):
        return traj[t] if cond is None else np.concatenate([traj[t], cond[t]], axis=-1)

    calls_before = sum(ae.decode_calls for ae in autoencoders.values())
    with T.no_grad():
        gammas = deque([model.fuse_frame(state(t), table) for t in range(th)], maxlen=th)
        for t in range(th, total):
            z = model.advance(list(gammas), state(t - 1)).value
            if plan.boundary:
                z = _impose(z, lattice, model, plan, etas)
            if not np.all(np.isfinite(z)):
                raise NumericalError('Error: non-finite latent at timestep ' + str(t), where=t)
            traj[t] = z
            gammas.append(model.fuse_frame(state(t), table))
    calls_in_loop = sum(ae.decode_calls for ae in autoencoders.values()) - calls_before
    logger.info('rolled out %d steps on lattice %s', plan.horizon, lattice)

    fields, off = {}, 0
    for name, l in model.solution_fields:
        ae = autoencoders[name]
        patches = ae.decode_latents(traj[decode, :, off:off + l], denormalize_output=True)
        fields[name] = reassemble_series(patches, lattice)
        off += l
    return RolloutResult(fields, decode, traj, tuple(lattice), calls_in_loop)

# Cell
def plan_from_dataset(dataset, model, horizon=None, boundary=(), decode=None):
    """
    A plan that starts from the first th frames of a ground truth sample and rolls to its last frame.
    """
    horizon = dataset.grid.n_steps - model.th if horizon is None else int(horizon)
    initial = {n: dataset.series[n].values[:model.th] for n, _ in model.solution_fields}
    conditions = {n: dataset.series[n].values for n, _ in model.condition_fields}
    return RolloutPlan(initial, horizon, conditions, list(boundary), decode)


def result_to_dataset(result, grid, config=None, seed=0):
    """
    Wrap decoded predictions as a Dataset so they are written and evaluated like ground truth.
    """
    frames = len(result.times)
    out_grid = GridSpec(grid.extents, grid.lengths, grid.dt, max(frames, 2), grid.stride)
    series = {}
    for name, values in result.fields.items():
        if frames < 2:
            values = np.concatenate([values, values])
        series[name] = FieldSeries(name, 'solution', values)
    meta = dict(config or {})
    meta['times'] = list(result.times)
    return Dataset(out_grid, series, meta, seed)

# Cell
def write_ppm(field2d, path, vmin=None, vmax=None):
    """
    Write a 2-D array as an 8-bit binary grayscale portable graymap (P5); x runs down the rows.
    """
    a = np.asarray(field2d, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError('Error: PPM frames are 2-D, got shape ' + str(a.shape))
    lo = a.min() if vmin is None else vmin
    hi = a.max() if vmax is None else vmax
    scaled = np.zeros_like(a) if hi <= lo else np.clip((a - lo) / (hi - lo), 0., 1.)
    img = np.round(scaled * 255).astype(np.uint8)
    with open(path, 'wb') as fl:
        fl.write('P5\n{} {}\n255\n'.format(img.shape[1], img.shape[0]).encode('ascii'))
        fl.write(img.tobytes())


def dump_ppm_frames(values, directory, name, times=None, z=-1):
    """
    One PPM per frame of `values` (n, *extents); 3-D fields are cut at z-layer `z` (top by default).
    All frames share one gray scale.
    """
    values = np.asarray(values)
    if values.ndim == 4:
        values = values[..., z]
    os.makedirs(directory, exist_ok=True)
    times = list(range(values.shape[0])) if times is None else list(times)
    lo, hi = float(values.min()), float(values.max())
    paths = []
    for t, frame in zip(times, values):
        path = os.path.join(directory, '{}_t{:04d}.ppm'.format(name, t))
        write_ppm(frame, path, lo, hi)
        paths.append(path)
    return paths
