__all__ = ['CurriculumSchedule', 'RolloutLossConfig', 'EncodedSample', 'TimeIntegratorModel', 'cl_probability',
           'fuse_spatial', 'predict_next', 'step_all', 'encode_dataset', 'window_loss', 'train_windows', 'train_ti']

# Internal Cell
#exporti
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from . import tensor as T
from .layers import mlp
from .optim import Adam, snapshot, restore
from .decomp import NeighborPolicy, neighbor_table, decompose_series, lattice_shape, normalize
from .shared import ShapeError, NumericalError, TrainingDiverged

logger = logging.getLogger(__name__)

# Cell
@dataclass
class CurriculumSchedule:
    """
    Probability of feeding ground truth latents: 1 during `warmup` epochs, then a linear decay to `eps_min`
    at epoch `epochs`.
    """
    warmup: int = 10
    eps_min: float = 0.0
    epochs: int = 100

    def __post_init__(self):
        if self.warmup < 0 or self.epochs < 1:
            raise ValueError('Error: curriculum needs warmup >= 0 and epochs >= 1')
        if not 0. <= self.eps_min <= 1.:
            raise ValueError('Error: eps_min must lie in [0, 1], got ' + str(self.eps_min))


def cl_probability(schedule, epoch):
    """
    Teacher forcing probability for `epoch`.
    """
    if epoch < schedule.warmup:
        return 1.0
    span = schedule.epochs - schedule.warmup
    if span <= 0:
        return float(schedule.eps_min)
    frac = min(epoch - schedule.warmup, span) / span
    return float(1. - (1. - schedule.eps_min) * frac)

# Cell
@dataclass
class RolloutLossConfig:
    """
    `K` prediction steps are unrolled before each weight update; the loss lives in 'latent' or 'decoded' space.
    """
    K: int = 10
    space: str = 'latent'

    def __post_init__(self):
        if self.K < 1:
            raise ValueError('Error: unroll length K must be >= 1, got ' + str(self.K))
        if self.space not in ('latent', 'decoded'):
            raise ValueError("Error: loss space must be 'latent' or 'decoded', got " + repr(self.space))

# Cell
@dataclass
class EncodedSample:
    """
    Latents of one sample: `solution` (N_t, N, sum l_s), `condition` (N_t, N, sum l_c) or None.
    `patches` optionally holds normalized solution patches (N_t, N, p, ..., p) per field for decoded losses.
    """
    lattice: Tuple[int, ...]
    solution: np.ndarray
    condition: Optional[np.ndarray] = None
    patches: Optional[Dict[str, np.ndarray]] = None

    @property
    def n_steps(self):
        return self.solution.shape[0]

    @property
    def count(self):
        return self.solution.shape[1]

    def state(self, t):
        if self.condition is None:
            return self.solution[t]
        return np.concatenate([self.solution[t], self.condition[t]], axis=-1)

# Cell
class TimeIntegratorModel:
    """
    Latent time stepper for one subdomain and its neighbors.

    F_spatial maps the center and 2d neighbor latents of one timestep, all fields concatenated
    (solutions first, then conditions, roster order), to a fused vector of width `d_gamma`. F_temporal maps
    the `th` most recent fused vectors, oldest first, to the next solution latent.

    `solution_fields` and `condition_fields` are lists of (name, latent size).
    """

    def __init__(self, dims, solution_fields, condition_fields=(), th=10, d_gamma=64, hidden=(128, 128),
                 activation='relu', policy='zero', residual=False, seed=0):
        self.dims = int(dims)
        self.solution_fields = [(str(n), int(l)) for n, l in solution_fields]
        self.condition_fields = [(str(n), int(l)) for n, l in condition_fields]
        self.th, self.d_gamma = int(th), int(d_gamma)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation, self.residual, self.seed = activation, bool(residual), seed
        self.policy = policy if isinstance(policy, NeighborPolicy) else NeighborPolicy.parse(policy, self.dims)

        if self.dims not in (2, 3):
            raise ShapeError('Error: time integrator supports 2-D or 3-D lattices, got ' + str(self.dims))
        if not self.solution_fields:
            raise ShapeError('Error: time integrator needs at least one solution field')
        if self.th < 1 or self.d_gamma < 1:
            raise ShapeError('Error: need th >= 1 and d_gamma >= 1, got th={} d_gamma={}'.format(self.th, self.d_gamma))
        if any(l < 1 for _, l in self.solution_fields + self.condition_fields):
            raise ShapeError('Error: latent sizes must be >= 1')
        if len(self.policy.modes) != self.dims:
            raise ShapeError('Error: neighbor policy has {} axes for a {}-D lattice'.format(
                len(self.policy.modes), self.dims))

        rng = np.random.default_rng(seed)
        self.spatial = mlp('ti.spatial', self.fusion_width, self.hidden, self.d_gamma, activation, rng)
        self.temporal = mlp('ti.temporal', self.th * self.d_gamma, self.hidden, self.solution_width, activation, rng)
        self._tables = {}

    @property
    def n_inputs(self):
        return 2 * self.dims + 1

    @property
    def solution_width(self):
        return sum(l for _, l in self.solution_fields)

    @property
    def condition_width(self):
        return sum(l for _, l in self.condition_fields)

    @property
    def latent_width(self):
        return self.solution_width + self.condition_width

    @property
    def fusion_width(self):
        return self.n_inputs * self.latent_width

    def params(self):
        return self.spatial.params() + self.temporal.params()

    def neighbor_table(self, shape):
        shape = tuple(shape)
        if len(shape) != self.dims:
            raise ShapeError('Error: lattice {} is not {}-D'.format(shape, self.dims))
        if shape not in self._tables:
            self._tables[shape] = neighbor_table(shape, self.policy)
        return self._tables[shape]

    def fuse_frame(self, state, table):
        """
        Fused vectors (N, d_gamma) for every row of `table` from one frame of latents `state` (M, latent_width).
        SENTINEL entries of `table` read a row of zeros.
        """
        state = T.as_tensor(state)
        if state.value.ndim != 2 or state.shape[1] != self.latent_width:
            raise ShapeError('Error: F_spatial expects frame latents of width {}, got shape {}'.format(
                self.latent_width, state.shape))
        padded = T.concat([state, np.zeros((1, self.latent_width))], axis=0)
        idx = np.where(table < 0, state.shape[0], table)
        gathered = T.take(padded, idx, axis=0)
        return self.spatial(T.reshape(gathered, (idx.shape[0], self.fusion_width)))

    def advance(self, gammas, last_state=None):
        """
        Next solution latents (N, sum l_s) from the `th` most recent fused frames, oldest first.
        """
        if len(gammas) != self.th:
            raise ShapeError('Error: F_temporal needs a history of th={} fused frames, got {}'.format(
                self.th, len(gammas)))
        hist = T.concat(list(gammas), axis=-1)
        out = self.temporal(hist)
        if self.residual:
            if last_state is None:
                raise ValueError('Error: a residual integrator needs the latest frame')
            last = T.as_tensor(last_state)
            out = out + T.take(last, np.arange(self.solution_width), axis=-1)
        return out

    def to_meta(self):
        return {'kind': 'integrator', 'dims': self.dims, 'solution_fields': [list(f) for f in self.solution_fields],
                'condition_fields': [list(f) for f in self.condition_fields], 'th': self.th,
                'd_gamma': self.d_gamma, 'hidden': list(self.hidden), 'activation': self.activation,
                'policy': str(self.policy), 'residual': self.residual, 'seed': self.seed,
                'spatial': self.spatial.to_dict(), 'temporal': self.temporal.to_dict()}

    @classmethod
    def from_meta(cls, meta, arrays):
        model = cls(meta['dims'], [tuple(f) for f in meta['solution_fields']],
                    [tuple(f) for f in meta['condition_fields']], meta['th'], meta['d_gamma'], tuple(meta['hidden']),
                    meta['activation'], meta['policy'], meta.get('residual', False), meta.get('seed', 0))
        for prm in model.params():
            if prm.id not in arrays or arrays[prm.id].shape != prm.shape:
                raise ShapeError('Error: checkpoint parameter {} missing or of the wrong shape'.format(prm.id))
            prm.value = arrays[prm.id].astype(np.float64)
        return model

    def __repr__(self):
        return 'TimeIntegratorModel(dims={}, fields={}, th={}, d_gamma={})'.format(
            self.dims, [n for n, _ in self.solution_fields + self.condition_fields], self.th, self.d_gamma)

# Cell
def fuse_spatial(model, inputs):
    """
    gamma for one subdomain (or a batch): `inputs` is (..., 2d+1, latent_width), center first then neighbors
    in [-x, +x, -y, +y(, -z, +z)] order.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    width = int(np.prod(inputs.shape[-2:])) if inputs.ndim >= 2 else inputs.shape[-1]
    if inputs.ndim < 2 or inputs.shape[-2:] != (model.n_inputs, model.latent_width):
        raise ShapeError('Error: F_spatial expects input width {} ({} x {}), got {} from shape {}'.format(
            model.fusion_width, model.n_inputs, model.latent_width, width, inputs.shape))
    lead = inputs.shape[:-2]
    with T.no_grad():
        return model.spatial(inputs.reshape(lead + (model.fusion_width,))).value


def predict_next(model, history):
    """
    Next solution latent from `history` (..., th, d_gamma), oldest first.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim < 2 or history.shape[-1] != model.d_gamma or history.shape[-2] != model.th:
        raise ShapeError('Error: predict_next needs a history of th={} vectors of width {}, got shape {}'.format(
            model.th, model.d_gamma, history.shape))
    with T.no_grad():
        return model.temporal(history.reshape(history.shape[:-2] + (model.th * model.d_gamma,))).value

# Cell
def step_all(model, history, shape, order=None):
    """
    Synchronous update of every subdomain of a lattice with extents `shape`.

    `history` is (th, N, latent_width), oldest first, solution then condition latents. Returns the next
    solution latents (N, sum l_s). With `order` the subdomains are evaluated one at a time in that order;
    every output only reads `history`, so the result does not depend on the order.
    """
    history = np.asarray(history, dtype=np.float64)
    table = model.neighbor_table(shape)
    n = table.shape[0]
    if history.ndim != 3 or history.shape[0] != model.th or history.shape[1:] != (n, model.latent_width):
        raise ShapeError('Error: step_all needs history of shape {}, got {}'.format(
            (model.th, n, model.latent_width), history.shape))

    with T.no_grad():
        if order is None:
            gammas = [model.fuse_frame(h, table) for h in history]
            return model.advance(gammas, history[-1]).value

        order = [int(i) for i in order]
        if sorted(order) != list(range(n)):
            raise ValueError('Error: order must be a permutation of the {} subdomain ids'.format(n))
        out = np.empty((n, model.solution_width))
        for i in order:
            gammas = [model.fuse_frame(h, table[i:i + 1]) for h in history]
            out[i] = model.advance(gammas, history[-1][i:i + 1]).value[0]
        return out

# Cell
def encode_dataset(autoencoders, dataset, model, with_patches=False):
    """
    Encode every field of `dataset` that the integrator roster names, with that field's autoencoder.
    """
    def _encode(names):
        blocks = []
        for name, l in names:
            if name not in dataset.series:
                raise ShapeError('Error: dataset has no field {!r}, fields are {}'.format(name, list(dataset.series)))
            ae = autoencoders[name]
            if ae.latent != l:
                raise ShapeError('Error: autoencoder {} has latent {}, integrator roster says {}'.format(name, ae.latent, l))
            blocks.append(ae.encode_patches(decompose_series(dataset.series[name].values, ae.p)))
        return np.concatenate(blocks, axis=-1) if blocks else None

    p = autoencoders[model.solution_fields[0][0]].p
    lattice = lattice_shape(dataset.grid.extents, p)
    patches = None
    if with_patches:
        patches = {name: normalize(decompose_series(dataset.series[name].values, p), autoencoders[name].stats)
                   for name, _ in model.solution_fields}
    return EncodedSample(lattice, _encode(model.solution_fields), _encode(model.condition_fields), patches)

# Internal Cell
def _block_table(table, n, copies):
    # block-diagonal neighbor table for `copies` stacked windows of n subdomains each
    return np.concatenate([np.where(table < 0, table, table + b * n) for b in range(copies)])


def _decoded_loss(model, pred, windows, t_off, autoencoders):
    loss, off = None, 0
    for name, l in model.solution_fields:
        ae = autoencoders[name]
        z = T.take(pred, np.arange(off, off + l), axis=-1)
        target = np.concatenate([s.patches[name][st + t_off] for s, st in windows])
        y = T.reshape(ae.decoder(z), (target.shape[0],) + ae.patch_shape)
        term = T.mse(y, target)
        loss = term if loss is None else loss + term
        off += l
    return loss

# Cell
def window_loss(model, windows, coins, K, space='latent', autoencoders=None):
    """
    Multi-step loss of one update: unroll K steps from each window's ground truth history and sum the
    per-step MSE. `windows` are (EncodedSample, start) pairs of one lattice shape, stacked into one batch.
    `coins` (K-1, len(windows)) picks ground truth (True) or the model's own prediction as the next input.
    """
    th = model.th
    n = windows[0][0].count
    table = _block_table(model.neighbor_table(windows[0][0].lattice), n, len(windows))
    ls = model.solution_width

    def gt_state(t_off):
        return np.concatenate([s.state(st + t_off) for s, st in windows])

    gammas = [model.fuse_frame(gt_state(j), table) for j in range(th)]
    last = T.Tensor(gt_state(th - 1))
    loss = None
    for k in range(K):
        pred = model.advance(gammas[-th:], last)
        if space == 'decoded':
            step_loss = _decoded_loss(model, pred, windows, th + k, autoencoders)
        else:
            target = np.concatenate([s.solution[st + th + k] for s, st in windows])
            step_loss = T.mse(pred, target)
        loss = step_loss if loss is None else loss + step_loss
        if k == K - 1:
            break

        gt = gt_state(th + k)
        use_pred = np.repeat(~np.asarray(coins[k], dtype=bool), n)[:, None].astype(np.float64)
        if use_pred.any():
            full = T.concat([pred, gt[:, ls:]], axis=-1) if gt.shape[1] > ls else pred
            nxt = full * use_pred + gt * (1. - use_pred)
        else:
            nxt = T.Tensor(gt)
        gammas.append(model.fuse_frame(nxt, table))
        last = nxt
    return loss

# Cell
def train_windows(samples, th, K, window_stride=1, train_window=None):
    """
    Training windows (sample index, start) and the unroll length they allow. Only the first
    `train_window` frames of each sample are used when it is set.
    """
    if window_stride < 1:
        raise ValueError('Error: window_stride must be >= 1')
    avail = [s.n_steps if train_window is None else min(s.n_steps, int(train_window)) for s in samples]
    if min(avail) < th + 1:
        raise ValueError('Error: samples need at least th+1={} frames for training, shortest has {}'.format(
            th + 1, min(avail)))
    k_eff = min(K, min(avail) - th)
    if k_eff < K:
        logger.warning('unroll length reduced from %d to %d by the training window', K, k_eff)
    windows = [(i, s) for i, a in enumerate(avail) for s in range(0, a - th - k_eff + 1, window_stride)]
    return windows, k_eff

# Cell
def train_ti(model, samples, schedule, loss_config=None, lr=1e-3, seed=0, window_stride=1, train_window=None,
             batch_windows=1, autoencoders=None, start_epoch=0, optimizer=None, coin_log=None):
    """
    Train the integrator on encoded samples with the multi-step loss and curriculum learning.

    At every epoch each window of `th` ground truth frames is unrolled K steps; at each unrolled input step one
    Bernoulli(eps) draw per window decides between the ground truth latent and the model's prediction.
    Condition latents always come from the encoder. One optimizer step per batch of windows.

    Returns (model, loss curve, optimizer). On a non-finite loss the parameters of the last completed
    epoch are restored and TrainingDiverged is raised.
    """
    loss_config = loss_config if loss_config is not None else RolloutLossConfig()
    if loss_config.space == 'decoded' and (autoencoders is None or any(s.patches is None for s in samples)):
        raise ValueError('Error: decoded-space loss needs autoencoders and samples encoded with patches')
    for s in samples:
        if s.solution.shape[-1] != model.solution_width or \
                (0 if s.condition is None else s.condition.shape[-1]) != model.condition_width:
            raise ShapeError('Error: encoded sample widths do not match the integrator roster {}'.format(
                model.solution_fields + model.condition_fields))

    windows, K = train_windows(samples, model.th, loss_config.K, window_stride, train_window)
    groups = {}
    for w in windows:
        groups.setdefault(tuple(samples[w[0]].lattice), []).append(w)

    params = model.params()
    opt = optimizer if optimizer is not None else Adam(params, lr=lr)
    good = snapshot(params)
    rows = []

    for epoch in range(start_epoch, schedule.epochs):
        rng = np.random.default_rng([seed, epoch])
        eps = cl_probability(schedule, epoch)
        losses = []
        for key in sorted(groups):
            group = groups[key]
            order = rng.permutation(len(group))
            for b in range(0, len(order), batch_windows):
                batch = [(samples[group[j][0]], group[j][1]) for j in order[b:b + batch_windows]]
                coins = rng.random((max(K - 1, 0), len(batch))) < eps
                if coin_log is not None:
                    coin_log.append(coins.copy())
                loss = window_loss(model, batch, coins, K, loss_config.space, autoencoders)
                if not np.isfinite(loss.value[0]):
                    restore(params, good)
                    raise TrainingDiverged('Error: integrator loss became non-finite at epoch ' + str(epoch),
                                           where=epoch, loss_curve=pd.DataFrame(rows))
                opt.zero_grad()
                T.backward(loss)
                try:
                    opt.step()
                except NumericalError as e:
                    restore(params, good)
                    raise TrainingDiverged(str(e), where=e.where, loss_curve=pd.DataFrame(rows))
                losses.append(loss.value[0])

        good = snapshot(params)
        rows.append({'epoch': epoch, 'eps': eps, 'loss': float(np.mean(losses)), 'updates': len(losses)})
        logger.info('ti epoch %d loss %.6g eps %.3f', epoch, rows[-1]['loss'], eps)

    if autoencoders is not None:
        for ae in autoencoders.values():
            T.zero_grad(ae.params())
    return model, pd.DataFrame(rows, columns=['epoch', 'eps', 'loss', 'updates']), opt
