__all__ = ['generate_splits', 'load_splits', 'field_patches', 'train_autoencoders', 'load_autoencoders',
           'train_integrator', 'load_integrator', 'run_rollout', 'run_eval', 'run_sweep', 'analysis']

# Internal Cell
#exporti
import logging
import multiprocessing
import os
from dataclasses import replace
from functools import partial

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .datagen import generate_sample, augment_all, write_split, read_split
from .decomp import decompose_series, compute_stats
from .autoencoder import train_autoencoder, reconstruction_error
from .integrator import CurriculumSchedule, RolloutLossConfig, encode_dataset, train_ti
from .rollout import BoundaryDirective, plan_from_dataset, rollout, result_to_dataset, dump_ppm_frames
from .evaluate import nrmse, persistence_baseline, compare_melt_pool, write_report
from .define_models import (define_autoencoder, define_integrator, save_model, load_model, load_training_state,
                            checkpoint_path)
from .plot import save_eval_plots, plot_loss
from .shared import ConfigError

logger = logging.getLogger(__name__)

# Internal Cell
def _sample(pde, grid, params, seed):
    return generate_sample(pde, grid, params, seed)


def _generate(cfg, grid, seeds, workers):
    f = partial(_sample, cfg.data.pde, grid, cfg.generator_params())
    if workers > 1:
        p = multiprocessing.Pool(workers)
        output = p.map(f, seeds)
        p.close()
        p.join()
    else:
        output = list(map(f, seeds))
    return output


def _save_loss_plot(curve, directory, stem, column='loss'):
    os.makedirs(directory, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    plot_loss(fig, ax, curve, column)
    fig.savefig(os.path.join(directory, stem + '.png'))
    plt.close(fig)

# Cell
def generate_splits(cfg, workers=1):
    """
    Generate and write the train and test splits. Training samples get the three augmentations when
    [data] augment is set; the test split uses the rollout grid.
    """
    if cfg.data.pde == 'external':
        raise ConfigError('Error: external data is read from [data] path, nothing to generate')
    seed = cfg.experiment.seed
    train = _generate(cfg, cfg.grid(), [seed * 100000 + i for i in range(cfg.data.n_train)], workers)
    test = _generate(cfg, cfg.test_grid(), [seed * 100000 + 50000 + i for i in range(cfg.data.n_test)], workers)
    if cfg.data.augment:
        train = augment_all(train)
    paths = cfg.paths()
    write_split(train, paths['train'])
    write_split(test, paths['test'])
    logger.info('wrote %d train and %d test samples under %s', len(train), len(test), os.path.dirname(paths['train']))
    return train, test


def load_splits(cfg):
    paths = cfg.paths()
    for split in ('train', 'test'):
        if not os.path.exists(os.path.join(paths[split], 'manifest.csv')):
            raise ConfigError('Error: no {} split under {}; run generate first'.format(split, paths[split]))
    return read_split(paths['train']), read_split(paths['test'])

# Cell
def field_patches(datasets, name, p):
    """All patches of field `name` over every sample and timestep, (M, p, ..., p)."""
    blocks = [decompose_series(ds.series[name].values, p) for ds in datasets]
    return np.concatenate([b.reshape((-1,) + b.shape[2:]) for b in blocks])

# Cell
def train_autoencoders(cfg, train=None, tag=''):
    """
    Train one autoencoder per field of the roster, independently, and write checkpoints and loss curves.
    """
    if train is None:
        train = load_splits(cfg)[0]
    a = cfg.autoencoder
    sols, conds = cfg.roster()
    paths = cfg.paths()
    os.makedirs(paths['reports'], exist_ok=True)
    models = {}
    for i, name in enumerate(sols + conds):
        seed = cfg.experiment.seed + i
        patches = field_patches(train, name, a.p)
        rng = np.random.default_rng(seed)
        patches = patches[rng.permutation(len(patches))]
        if a.max_patches and len(patches) > a.max_patches:
            patches = patches[:a.max_patches]
        n_val = int(len(patches) * a.val_fraction)
        val, fit = (patches[:n_val], patches[n_val:]) if n_val > 0 else (None, patches)

        stats = compute_stats(np.concatenate([ds.series[name].values.ravel() for ds in train]), name)
        model = define_autoencoder(cfg, name, stats, seed)
        model, curve = train_autoencoder(model, fit, a.epochs, a.batch_size, a.lr, seed, val_patches=val)
        err = reconstruction_error(model, val if val is not None else fit)
        logger.info('autoencoder %s reconstruction rel. L2 %.4g', name, err)

        save_model(model, checkpoint_path(cfg, name, tag), reconstruction_error=float(err))
        curve.to_csv(os.path.join(paths['reports'], 'loss_ae_{}{}.csv'.format(name, '_' + tag if tag else '')),
                     index=False)
        if cfg.eval.plots:
            _save_loss_plot(curve, paths['plots'], 'loss_ae_' + name + ('_' + tag if tag else ''), 'train_loss')
        models[name] = model
    return models


def load_autoencoders(cfg, tag=''):
    sols, conds = cfg.roster()
    models = {}
    for name in sols + conds:
        path = checkpoint_path(cfg, name, tag)
        if not os.path.exists(path):
            raise ConfigError('Error: autoencoder checkpoint {} is missing; run train-ae before train-ti, '
                              'rollout or eval'.format(path))
        models[name] = load_model(path)
    return models

# Cell
def train_integrator(cfg, train=None, autoencoders=None, tag='', ae_tag=''):
    """
    Encode the training split with the frozen autoencoders and train the time integrator. With
    [integrator] resume the run continues from its checkpoint and extends the loss curve.
    """
    if train is None:
        train = load_splits(cfg)[0]
    if autoencoders is None:
        autoencoders = load_autoencoders(cfg, ae_tag)
    t = cfg.integrator
    paths = cfg.paths()
    ckpt = checkpoint_path(cfg, 'ti', tag)
    curve_path = os.path.join(paths['reports'], 'loss_ti{}.csv'.format('_' + tag if tag else ''))
    os.makedirs(paths['reports'], exist_ok=True)

    model, opt, start, previous = None, None, 0, None
    if t.resume and os.path.exists(ckpt):
        model = load_model(ckpt)
        opt, meta = load_training_state(ckpt, model)
        start = int(meta.get('epochs_done', 0))
        if os.path.exists(curve_path):
            previous = pd.read_csv(curve_path)
        logger.info('resuming integrator training at epoch %d', start)
    if model is None:
        model = define_integrator(cfg)

    decoded = t.loss_space == 'decoded'
    samples = [encode_dataset(autoencoders, ds, model, with_patches=decoded) for ds in train]
    schedule = CurriculumSchedule(t.warmup, t.eps_min, t.epochs)
    model, curve, opt = train_ti(model, samples, schedule, RolloutLossConfig(t.K, t.loss_space), lr=t.lr,
                                 seed=cfg.experiment.seed, window_stride=t.window_stride,
                                 train_window=t.train_window, batch_windows=t.batch_windows,
                                 autoencoders=autoencoders if decoded else None, start_epoch=start, optimizer=opt)
    if previous is not None:
        curve = pd.concat([previous[previous.epoch < start], curve], ignore_index=True)
    save_model(model, ckpt, opt, epochs_done=max(t.epochs, start), K=t.K, warmup=t.warmup, eps_min=t.eps_min,
               train_window=t.train_window)
    curve.to_csv(curve_path, index=False)
    if cfg.eval.plots:
        _save_loss_plot(curve, cfg.paths()['plots'], 'loss_ti' + ('_' + tag if tag else ''))
    return model, curve


def load_integrator(cfg, tag=''):
    path = checkpoint_path(cfg, 'ti', tag)
    if not os.path.exists(path):
        raise ConfigError('Error: integrator checkpoint {} is missing; run train-ti first'.format(path))
    return load_model(path)

# Cell
def run_rollout(cfg, test=None, autoencoders=None, model=None, tag='', ae_tag=''):
    """
    Roll out every test sample from its first th frames, write the decoded predictions and, on request,
    PPM frames of every decoded step.
    """
    if test is None:
        test = load_splits(cfg)[1]
    if autoencoders is None:
        autoencoders = load_autoencoders(cfg, ae_tag)
    if model is None:
        model = load_integrator(cfg, tag)

    values = cfg.dirichlet_values()
    boundary = [BoundaryDirective(axis, kind, values if kind == 'dirichlet' else {})
                for axis, kind in cfg.boundary_directives()]
    decode = list(cfg.rollout.decode) if cfg.rollout.decode else None
    paths = cfg.paths()

    predictions = []
    for i, ds in enumerate(test):
        plan = plan_from_dataset(ds, model, cfg.rollout.horizon, boundary, decode)
        result = rollout(autoencoders, model, plan)
        pred = result_to_dataset(result, ds.grid, {'pde': ds.config.get('pde', cfg.data.pde), 'tag': tag}, ds.seed)
        predictions.append(pred)
        if cfg.rollout.ppm:
            for name, values_ in result.fields.items():
                dump_ppm_frames(values_, os.path.join(paths['ppm'], 'sample_{:04d}'.format(i)), name,
                                result.times, cfg.rollout.ppm_z)
    write_split(predictions, os.path.join(paths['predictions'], tag) if tag else paths['predictions'])
    return predictions

# Cell
def run_eval(cfg, test=None, predictions=None, th=None, tag=''):
    """
    nRMSE of the predictions against the test split next to the persistence baseline. Writes the per-row
    report, the per-timestep curve, per-sample scores and, for 3-D runs with [eval] T_melt, melt pool depth.

    Returns (model report, baseline report).
    """
    if test is None:
        test = load_splits(cfg)[1]
    paths = cfg.paths()
    if predictions is None:
        pred_dir = os.path.join(paths['predictions'], tag) if tag else paths['predictions']
        if not os.path.exists(os.path.join(pred_dir, 'manifest.csv')):
            raise ConfigError('Error: no predictions under {}; run rollout first'.format(pred_dir))
        predictions = read_split(pred_dir)
    th = cfg.integrator.th if th is None else th

    gts, preds = [], []
    for gt, pred in zip(test, predictions):
        times = pred.config.get('times', list(range(pred.grid.n_steps)))
        if times != list(range(len(times))):
            raise ConfigError('Error: evaluation needs every frame decoded, [rollout] decode selects ' + str(times))
        n = min(len(times), gt.grid.n_steps)
        names = list(pred.series)
        gts.append({k: gt.series[k].values[:n] for k in names})
        preds.append({k: pred.series[k].values[:n] for k in names})

    report = nrmse(preds, gts, th)
    base = persistence_baseline(gts, th)
    report.baseline = base.aggregate

    os.makedirs(paths['reports'], exist_ok=True)
    suffix = '_' + tag if tag else ''
    write_report(report, os.path.join(paths['reports'], 'eval{}.csv'.format(suffix)))
    pd.DataFrame({'nrmse': report.curve, 'baseline': base.curve}).rename_axis('t').to_csv(
        os.path.join(paths['reports'], 'eval_curve{}.csv'.format(suffix)))
    per_sample = pd.DataFrame({'nrmse': report.rows[~report.rows.excluded].groupby('sample').nrmse.mean(),
                               'baseline': base.rows[~base.rows.excluded].groupby('sample').nrmse.mean()})
    per_sample.to_csv(os.path.join(paths['reports'], 'eval_samples{}.csv'.format(suffix)))

    depth = None
    if cfg.eval.T_melt is not None and cfg.dims == 3:
        sol = cfg.roster()[0][0]
        depth = pd.concat([compare_melt_pool(p[sol], g[sol], cfg.eval.T_melt, ds.grid.spacing[-1]).assign(sample=i)
                           for i, (p, g, ds) in enumerate(zip(preds, gts, test))], ignore_index=True)
        depth.to_csv(os.path.join(paths['reports'], 'melt_pool{}.csv'.format(suffix)), index=False)

    if cfg.eval.plots:
        save_eval_plots(report, base, preds, gts, paths['plots'], suffix, depth)

    logger.info('nRMSE %.6g persistence %.6g', report.aggregate, report.baseline)
    return report, base

# Cell
def run_sweep(cfg, train=None, test=None):
    """
    Train and evaluate one model per value of [sweep] axis ('latent', 'th' or 'train_window'); writes one
    checkpoint per value and a comparison CSV.
    """
    axis = cfg.sweep.axis
    if not axis:
        raise ConfigError('Error: [sweep] axis is not set')
    if train is None or test is None:
        train, test = load_splits(cfg)

    shared_ae = None
    rows = []
    for value in cfg.sweep.values:
        tag = '{}{}'.format(axis, value)
        if axis == 'latent':
            variant = replace(cfg, autoencoder=replace(cfg.autoencoder, latent=int(value)))
            ae_tag = tag
            aes = train_autoencoders(variant, train, tag=ae_tag)
        else:
            if axis == 'th':
                variant = replace(cfg, integrator=replace(cfg.integrator, th=int(value)))
            else:
                variant = replace(cfg, integrator=replace(cfg.integrator, train_window=int(value)))
            ae_tag = ''
            if shared_ae is None:
                try:
                    shared_ae = load_autoencoders(cfg)
                except ConfigError:
                    shared_ae = train_autoencoders(cfg, train)
            aes = shared_ae
        variant.validate()

        model, curve = train_integrator(variant, train, aes, tag=tag)
        predictions = run_rollout(variant, test, aes, model, tag=tag)
        report, base = run_eval(variant, test, predictions, tag=tag)
        rows.append({'axis': axis, 'value': value, 'nrmse': report.aggregate, 'baseline': base.aggregate,
                     'final_loss': float(curve.loss.iloc[-1]) if len(curve) else np.nan,
                     'checkpoint': checkpoint_path(variant, 'ti', tag)})

    table = pd.DataFrame(rows)
    os.makedirs(cfg.paths()['reports'], exist_ok=True)
    table.to_csv(os.path.join(cfg.paths()['reports'], 'sweep_{}.csv'.format(axis)), index=False)
    return table

# Cell
def analysis(cfg, workers=1, ret=['models', 'report']):
    """
    This is a helpful function to run a complete experiment. The function will:
    1. Generate the train and test splits (or read them for external data)
    2. Train the autoencoders, then the time integrator
    3. Roll out the test samples and evaluate them against persistence

    `ret` picks what is returned, in order, from 'models', 'report', 'baseline', 'predictions', 'data'.
    """
    cfg.validate()
    if cfg.data.pde == 'external':
        train, test = load_splits(cfg)
    else:
        train, test = generate_splits(cfg, workers)
    aes = train_autoencoders(cfg, train)
    model, _ = train_integrator(cfg, train, aes)
    predictions = run_rollout(cfg, test, aes, model)
    report, base = run_eval(cfg, test, predictions)

    out = []
    for r in ret:
        if r == 'models':
            out.append((aes, model))
        elif r == 'report':
            out.append(report)
        elif r == 'baseline':
            out.append(base)
        elif r == 'predictions':
            out.append(predictions)
        elif r == 'data':
            out.append((train, test))
    return out
