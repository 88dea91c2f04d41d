__all__ = ['define_autoencoder', 'define_integrator', 'save_model', 'load_model',
           'load_training_state', 'checkpoint_path']

# Internal Cell
#exporti
import os

import numpy as np

from .autoencoder import AutoencoderModel
from .integrator import TimeIntegratorModel
from .optim import Adam
from .container import write_container, read_container
from .shared import ContainerError

# Cell
def define_autoencoder(cfg, field, stats=None, seed=None):
    """
    A helper function to define the autoencoder of one field from an ExperimentConfig.
    """
    a = cfg.autoencoder
    seed = cfg.experiment.seed if seed is None else seed
    return AutoencoderModel(field, p=a.p, latent=cfg.latent_of(field), dims=cfg.dims, channels=a.channels,
                            kernel=a.kernel, activation=a.activation, stats=stats, seed=seed)

# Cell
def define_integrator(cfg):
    """
    A helper function to define the time integrator from an ExperimentConfig.
    """
    t = cfg.integrator
    sols, conds = cfg.roster()
    return TimeIntegratorModel(cfg.dims, [(n, cfg.latent_of(n)) for n in sols], [(n, cfg.latent_of(n)) for n in conds],
                               th=t.th, d_gamma=t.d_gamma, hidden=t.hidden,
                               activation=t.activation, policy=t.policy, residual=t.residual,
                               seed=cfg.experiment.seed)

# Cell
def checkpoint_path(cfg, name, tag=''):
    """Checkpoint file of `name` ('ti' or a field name for its autoencoder)."""
    stem = 'ti' if name == 'ti' else 'ae_' + name
    return os.path.join(cfg.paths()['checkpoints'], stem + (('_' + tag) if tag else '') + '.cmls')

# Cell
def save_model(model, path, optimizer=None, **extra):
    """
    Write a model (and optionally its Adam moments) to a CMLS container. `extra` entries go to the header.
    """
    meta = model.to_meta()
    meta.update(extra)
    arrays = [(p.id, p.value) for p in model.params()]
    if optimizer is not None:
        meta['adam'] = {'t': optimizer.t, 'lr': optimizer.lr, 'beta1': optimizer.beta1, 'beta2': optimizer.beta2,
                        'eps': optimizer.eps}
        arrays += [('adam.m.' + p.id, optimizer.m[p.id]) for p in optimizer.params]
        arrays += [('adam.v.' + p.id, optimizer.v[p.id]) for p in optimizer.params]
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    write_container(path, meta, arrays)


def load_model(path):
    """
    Read a model written by `save_model`.
    """
    meta, arrays = read_container(path)
    kind = meta.get('kind')
    if kind == 'autoencoder':
        return AutoencoderModel.from_meta(meta, arrays)
    if kind == 'integrator':
        return TimeIntegratorModel.from_meta(meta, arrays)
    raise ContainerError('Error: {} holds a {!r}, not a model checkpoint'.format(path, kind))


def load_training_state(path, model):
    """
    Adam state and header of a checkpoint, to resume training `model` (already loaded from `path`).
    """
    meta, arrays = read_container(path)
    if 'adam' not in meta:
        return None, meta
    a = meta['adam']
    opt = Adam(model.params(), a['lr'], a['beta1'], a['beta2'], a['eps'])
    opt.t = a['t']
    for p in model.params():
        opt.m[p.id] = arrays['adam.m.' + p.id].astype(np.float64)
        opt.v[p.id] = arrays['adam.v.' + p.id].astype(np.float64)
    return opt, meta
