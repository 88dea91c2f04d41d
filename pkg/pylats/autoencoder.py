__all__ = ['AutoencoderModel', 'LatentFrame', 'encode', 'decode', 'train_autoencoder', 'reconstruction_error']

# Internal Cell
#exporti
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import tensor as T
from .layers import LayerSpec, Sequential
from .optim import Adam, snapshot, restore
from .decomp import SubdomainLattice, NormStats, compute_stats, normalize, denormalize
from .loss_functions import rel_l2
from .shared import ShapeError, NumericalError, TrainingDiverged

logger = logging.getLogger(__name__)

_CHUNK = 4096

# Cell
@dataclass
class LatentFrame:
    """
    Latent vectors of every subdomain of one field at one timestep; `latents` has shape lattice + (l,).
    """
    latents: np.ndarray
    field: str = ''
    t: int = 0

    @property
    def shape(self):
        return self.latents.shape[:-1]

    @property
    def size(self):
        return self.latents.shape[-1]

    @property
    def count(self):
        return int(np.prod(self.shape))

# Cell
class AutoencoderModel:
    """
    Convolutional autoencoder for patches of one field.

    The encoder runs stride-2 'same' convolutions (one per entry of `channels`) and a final dense layer to the
    latent of size `latent`, with no activation on the latent. The decoder mirrors it with transpose
    convolutions. `stats` hold the z-score of the field over the training split.
    """

    def __init__(self, field, p=8, latent=16, dims=2, channels=(16, 32), kernel=3, activation='tanh', stats=None,
                 seed=0):
        channels = tuple(int(c) for c in channels)
        n_stages = len(channels)
        if n_stages == 0 or p % (2 ** n_stages) != 0:
            raise ShapeError('Error: patch size {} must be divisible by 2^{} for {} stride-2 stages'.format(
                p, n_stages, n_stages))
        self.field, self.p, self.latent, self.dims = field, int(p), int(latent), int(dims)
        self.channels, self.kernel, self.activation = channels, int(kernel), activation
        self.stats = stats
        self.seed = seed
        self.decode_calls = 0

        b = self.p // 2 ** n_stages
        flat = channels[-1] * b ** self.dims
        rng = np.random.default_rng(seed)

        enc = []
        prev = 1
        for i, c in enumerate(channels):
            enc.append(LayerSpec('conv', '{}.enc.conv{}'.format(field, i), in_channels=prev, out_channels=c,
                                 kernel=self.kernel, stride=2, dims=self.dims))
            enc.append(LayerSpec('activation', '{}.enc.act{}'.format(field, i), activation=activation))
            prev = c
        enc.append(LayerSpec('reshape', '{}.enc.flatten'.format(field), shape=(flat,)))
        enc.append(LayerSpec('dense', '{}.enc.latent'.format(field), in_width=flat, out_width=self.latent))
        self.encoder = Sequential(enc, (1,) + (self.p,) * self.dims, rng)

        dec = [LayerSpec('dense', '{}.dec.expand'.format(field), in_width=self.latent, out_width=flat),
               LayerSpec('activation', '{}.dec.act_in'.format(field), activation=activation),
               LayerSpec('reshape', '{}.dec.unflatten'.format(field), shape=(channels[-1],) + (b,) * self.dims)]
        for i in reversed(range(n_stages)):
            out = channels[i - 1] if i > 0 else 1
            dec.append(LayerSpec('conv_transpose', '{}.dec.deconv{}'.format(field, i), in_channels=channels[i],
                                 out_channels=out, kernel=self.kernel, stride=2, dims=self.dims))
            if i > 0:
                dec.append(LayerSpec('activation', '{}.dec.act{}'.format(field, i), activation=activation))
        self.decoder = Sequential(dec, (self.latent,), rng)

        if self.decoder.out_shape != self.encoder.in_shape:
            raise ShapeError('Error: decoder of {} produces {}, encoder takes {}'.format(
                field, self.decoder.out_shape, self.encoder.in_shape))

    def params(self):
        return self.encoder.params() + self.decoder.params()

    @property
    def patch_shape(self):
        return (self.p,) * self.dims

    def _check_patches(self, patches):
        if patches.ndim < self.dims or patches.shape[-self.dims:] != self.patch_shape:
            raise ShapeError('Error: autoencoder {} expects patches of extent {}, got array of shape {}'.format(
                self.field, self.patch_shape, patches.shape))

    def encode_patches(self, patches, normalized=False):
        """
        Encode an array of patches (..., p, ..., p) to latents (..., l). Raw patches are normalized first.
        """
        patches = np.asarray(patches, dtype=np.float64)
        self._check_patches(patches)
        if not normalized:
            if self.stats is None:
                raise ValueError('Error: autoencoder {} has no NormStats, pass normalized patches'.format(self.field))
            patches = normalize(patches, self.stats)
        lead = patches.shape[:-self.dims]
        x = patches.reshape((-1, 1) + self.patch_shape)
        out = np.empty((x.shape[0], self.latent))
        with T.no_grad():
            for i in range(0, x.shape[0], _CHUNK):
                out[i:i + _CHUNK] = self.encoder(x[i:i + _CHUNK]).value
        return out.reshape(lead + (self.latent,))

    def decode_latents(self, latents, denormalize_output=False):
        """
        Decode latents (..., l) to patches (..., p, ..., p), in normalized units unless `denormalize_output`.
        """
        latents = np.asarray(latents, dtype=np.float64)
        if latents.shape[-1:] != (self.latent,):
            raise ShapeError('Error: autoencoder {} decodes latents of length {}, got shape {}'.format(
                self.field, self.latent, latents.shape))
        self.decode_calls += 1
        lead = latents.shape[:-1]
        z = latents.reshape(-1, self.latent)
        out = np.empty((z.shape[0],) + self.patch_shape)
        with T.no_grad():
            for i in range(0, z.shape[0], _CHUNK):
                out[i:i + _CHUNK] = self.decoder(z[i:i + _CHUNK]).value[:, 0]
        out = out.reshape(lead + self.patch_shape)
        if denormalize_output:
            out = denormalize(out, self.stats)
        return out

    def reconstruct(self, patches):
        """Raw patches -> encode -> decode -> raw patches."""
        return self.decode_latents(self.encode_patches(patches), denormalize_output=True)

    def to_meta(self):
        return {'kind': 'autoencoder', 'field': self.field, 'p': self.p, 'latent': self.latent, 'dims': self.dims,
                'channels': list(self.channels), 'kernel': self.kernel, 'activation': self.activation,
                'seed': self.seed, 'stats': self.stats.to_dict() if self.stats is not None else None,
                'encoder': self.encoder.to_dict(), 'decoder': self.decoder.to_dict()}

    @classmethod
    def from_meta(cls, meta, arrays):
        stats = NormStats.from_dict(meta['stats']) if meta.get('stats') else None
        model = cls(meta['field'], meta['p'], meta['latent'], meta['dims'], tuple(meta['channels']),
                    meta.get('kernel', 3), meta.get('activation', 'tanh'), stats, meta.get('seed', 0))
        for prm in model.params():
            if prm.id not in arrays:
                raise ShapeError('Error: checkpoint lacks parameter ' + prm.id)
            if arrays[prm.id].shape != prm.shape:
                raise ShapeError('Error: parameter {} has shape {} in the checkpoint, model declares {}'.format(
                    prm.id, arrays[prm.id].shape, prm.shape))
            prm.value = arrays[prm.id].astype(np.float64)
        return model

    def __repr__(self):
        return 'AutoencoderModel(field={}, p={}, latent={}, dims={})'.format(self.field, self.p, self.latent, self.dims)

# Cell
def encode(model, lattice):
    """
    Encode every patch of a SubdomainLattice (raw values) into a LatentFrame.
    """
    if lattice.p != model.p or lattice.dims != model.dims:
        raise ShapeError('Error: lattice patches are {}-D of extent {}, autoencoder {} takes {}-D extent {}'.format(
            lattice.dims, lattice.p, model.field, model.dims, model.p))
    return LatentFrame(model.encode_patches(lattice.patches), lattice.field or model.field, lattice.t)


def decode(model, frame, denormalize_output=True):
    """
    Decode a LatentFrame back into a SubdomainLattice of p^d patches.
    """
    if frame.size != model.latent:
        raise ShapeError('Error: frame latents have length {}, autoencoder {} uses {}'.format(
            frame.size, model.field, model.latent))
    return SubdomainLattice(model.decode_latents(frame.latents, denormalize_output), model.p, frame.field, frame.t)

# Cell
def reconstruction_error(model, patches):
    """
    Relative L2 error of decode(encode(x)) over a set of raw patches.
    """
    return rel_l2(patches, model.reconstruct(patches))

# Internal Cell
def _mse_on(model, x):
    err, n = 0., 0
    with T.no_grad():
        for i in range(0, x.shape[0], _CHUNK):
            xb = x[i:i + _CHUNK]
            y = model.decoder(model.encoder(xb)).value
            err += float(np.sum((y - xb) ** 2))
            n += xb.size
    return err / n

# Cell
def train_autoencoder(model, patches, epochs=100, batch_size=64, lr=1e-3, seed=0, val_patches=None,
                      target_rel_l2=None, max_steps=None):
    """
    Fit `model` to reconstruct raw `patches` (M, p, ..., p) under an MSE loss with Adam.

    NormStats are computed from `patches` when the model has none. The parameters with the lowest validation
    loss (training loss without a validation set) are kept. Training stops early once the training set
    reconstruction error drops below `target_rel_l2` or after `max_steps` optimizer steps.

    Returns the model and a per-epoch loss curve.
    """
    patches = np.asarray(patches, dtype=np.float64)
    model._check_patches(patches)
    if model.stats is None:
        model.stats = compute_stats(patches, model.field)
    x = normalize(patches, model.stats).reshape((-1, 1) + model.patch_shape)
    xv = None
    if val_patches is not None:
        xv = normalize(val_patches, model.stats).reshape((-1, 1) + model.patch_shape)

    params = model.params()
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    best, best_loss = snapshot(params), np.inf
    rows, steps = [], 0

    for epoch in range(epochs):
        order = rng.permutation(x.shape[0])
        for i in range(0, x.shape[0], batch_size):
            xb = x[order[i:i + batch_size]]
            loss = T.mse(model.decoder(model.encoder(xb)), xb)
            if not np.isfinite(loss.value[0]):
                restore(params, best)
                raise TrainingDiverged('Error: autoencoder {} loss became non-finite at epoch {}'.format(
                    model.field, epoch), where=epoch, loss_curve=pd.DataFrame(rows))
            opt.zero_grad()
            T.backward(loss)
            try:
                opt.step()
            except NumericalError as e:
                restore(params, best)
                raise TrainingDiverged(str(e), where=e.where, loss_curve=pd.DataFrame(rows))
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break

        train_loss = _mse_on(model, x)
        val_loss = _mse_on(model, xv) if xv is not None else np.nan
        monitor = val_loss if xv is not None else train_loss
        if not np.isfinite(monitor):
            restore(params, best)
            raise TrainingDiverged('Error: autoencoder {} loss became non-finite at epoch {}'.format(
                model.field, epoch), where=epoch, loss_curve=pd.DataFrame(rows))
        if monitor < best_loss:
            best, best_loss = snapshot(params), monitor
        rows.append({'epoch': epoch, 'step': steps, 'train_loss': train_loss, 'val_loss': val_loss})
        logger.info('ae %s epoch %d loss %.6g val %.6g', model.field, epoch, train_loss, val_loss)

        if target_rel_l2 is not None and np.sqrt(train_loss / np.mean(x ** 2)) < target_rel_l2:
            break
        if max_steps is not None and steps >= max_steps:
            break

    restore(params, best)
    return model, pd.DataFrame(rows, columns=['epoch', 'step', 'train_loss', 'val_loss'])
