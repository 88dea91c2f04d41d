__all__ = ['EvalReport', 'nrmse', 'persistence_baseline', 'melt_pool_depth', 'compare_melt_pool', 'write_report',
           'read_report']

# Internal Cell
#exporti
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .datagen import Dataset, FieldSeries
from .loss_functions import nrmse_terms
from .shared import ShapeError

logger = logging.getLogger(__name__)

# Cell
@dataclass
class EvalReport:
    """
    nRMSE of a set of predictions. `rows` has one line per (sample, var, t) with the normalized error and an
    `excluded` flag for zero-norm ground truth frames; `curve` and `per_variable` are means over it.
    """
    aggregate: float
    curve: pd.Series
    per_variable: pd.Series
    rows: pd.DataFrame
    n_test: int
    n_var: int
    n_t: int
    th: int
    baseline: float = np.nan

    def summary(self):
        return 'nRMSE {:.6g} | persistence {:.6g}'.format(self.aggregate, self.baseline)

# Internal Cell
def _as_fields(x):
    # Dataset | {name: FieldSeries or array} -> {name: float64 array}
    if isinstance(x, Dataset):
        return {s.name: s.values.astype(np.float64) for s in x.solutions()}
    out = {}
    for name, v in x.items():
        out[name] = (v.values if isinstance(v, FieldSeries) else np.asarray(v)).astype(np.float64)
    return out


def _as_samples(x):
    if isinstance(x, (list, tuple)):
        return [_as_fields(s) for s in x]
    return [_as_fields(x)]

# Cell
def nrmse(pred, gt, th):
    """
    Mean over samples, variables and frames t = th .. N_t-1 of ||pred_t - gt_t|| / ||gt_t||, each norm taken
    over all grid cells of the frame. `pred` and `gt` are a sample or a list of samples; a sample is a Dataset
    or a dict of field name to series (N_t, *extents). Frames with zero ground truth norm are excluded with
    a warning.
    """
    preds, gts = _as_samples(pred), _as_samples(gt)
    if len(preds) != len(gts):
        raise ShapeError('Error: {} predicted samples for {} ground truth samples'.format(len(preds), len(gts)))

    rows = []
    n_t = None
    for n, (p, g) in enumerate(zip(preds, gts)):
        if sorted(p) != sorted(g):
            raise ShapeError('Error: sample {} has variables {} predicted and {} in ground truth'.format(
                n, sorted(p), sorted(g)))
        for var in sorted(g):
            if p[var].shape != g[var].shape:
                raise ShapeError('Error: sample {} variable {} has shape {} predicted, {} ground truth'.format(
                    n, var, p[var].shape, g[var].shape))
            if g[var].shape[0] <= th:
                raise ShapeError('Error: need more than th={} frames, got {}'.format(th, g[var].shape[0]))
            n_t = g[var].shape[0]
            terms = nrmse_terms(p[var][th:], g[var][th:])
            for t, e in zip(range(th, n_t), terms):
                if np.isnan(e):
                    logger.warning('sample %d variable %s frame %d has zero ground truth norm, excluded', n, var, t)
                rows.append({'sample': n, 'var': var, 't': t, 'nrmse': e, 'excluded': bool(np.isnan(e))})

    rows = pd.DataFrame(rows, columns=['sample', 'var', 't', 'nrmse', 'excluded'])
    kept = rows[~rows.excluded]
    aggregate = float(kept.nrmse.mean()) if len(kept) else np.nan
    return EvalReport(aggregate, kept.groupby('t').nrmse.mean(), kept.groupby('var').nrmse.mean(), rows,
                      len(gts), len(gts[0]), n_t, th)

# Cell
def persistence_baseline(gt, th):
    """
    nRMSE of the predictor that repeats frame th-1 for every later frame.
    """
    if th < 1:
        raise ValueError('Error: persistence needs th >= 1, got ' + str(th))
    frozen = []
    for sample in _as_samples(gt):
        f = {}
        for var, u in sample.items():
            if u.shape[0] <= th:
                raise ShapeError('Error: need N_t > th={}, got {}'.format(th, u.shape[0]))
            v = u.copy()
            v[th:] = u[th - 1]
            f[var] = v
        frozen.append(f)
    return nrmse(frozen, gt if isinstance(gt, (list, tuple)) else [gt], th)

# Cell
def melt_pool_depth(T, T_melt, dz):
    """
    Depth below the top (max-z) surface to which the temperature exceeds `T_melt`, per timestep: the
    number of contiguous z-layers from the top that hold any cell above `T_melt`, times `dz`.
    """
    T = (T.values if isinstance(T, FieldSeries) else np.asarray(T))
    if T.ndim != 4:
        raise ShapeError('Error: melt pool depth needs a 3-D series (N_t, N_x, N_y, N_z), got shape ' + str(T.shape))
    hot = np.any(T > T_melt, axis=(1, 2))[:, ::-1]
    layers = np.cumprod(hot, axis=1).sum(axis=1)
    return layers * float(dz)


def compare_melt_pool(pred_T, gt_T, T_melt, dz):
    """Predicted and ground truth melt pool depth side by side."""
    gt_depth = melt_pool_depth(gt_T, T_melt, dz)
    return pd.DataFrame({'t': np.arange(len(gt_depth)), 'depth_pred': melt_pool_depth(pred_T, T_melt, dz),
                         'depth_gt': gt_depth})

# Cell
def write_report(report, path):
    """
    CSV with one row per (sample, var, t) followed by footer rows for the aggregate and the baseline.
    """
    footer = pd.DataFrame([{'sample': 'aggregate', 'var': '', 't': '', 'nrmse': report.aggregate, 'excluded': False},
                           {'sample': 'baseline', 'var': '', 't': '', 'nrmse': report.baseline, 'excluded': False}])
    pd.concat([report.rows.astype({'sample': object, 't': object}), footer], ignore_index=True).to_csv(path, index=False)


def read_report(path):
    """Return (rows, aggregate, baseline) from a report CSV."""
    df = pd.read_csv(path, dtype={'sample': str})
    foot = df[df['sample'].isin(['aggregate', 'baseline'])].set_index('sample').nrmse
    rows = df[~df['sample'].isin(['aggregate', 'baseline'])].astype({'sample': int, 't': float}).astype({'t': int})
    return rows.reset_index(drop=True), float(foot['aggregate']), float(foot['baseline'])
