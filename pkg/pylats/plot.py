__all__ = ['ax_style', 'plot_nrmse_curve', 'plot_field_comparison', 'plot_melt_pool', 'plot_loss',
           'save_eval_plots']

# Internal Cell
#exporti
import os

import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

# Cell
def ax_style(ax, ylim=None, xlim=None, xlabel=None, ylabel=None, title=None,
             legend=None, legend_inside_plot=True, topborder=False, rightborder=False, **kwargs):
    """
    A helper function to define many elements of axis style at once.
    """

    if legend is not None:
        if legend_inside_plot:
            ax.legend(legend)
        else:
            ax.legend(legend, bbox_to_anchor=(1.05, 1), loc=2, borderaxespad=0.5, frameon=False)
            plt.subplots_adjust(right=.85)

    if ylim is not None: ax.set_ylim(ylim)
    if xlim is not None: ax.set_xlim(xlim)
    if xlabel is not None: ax.set_xlabel(xlabel)
    if ylabel is not None: ax.set_ylabel(ylabel)
    if title is not None: ax.set_title(title)

    ax.spines['top'].set_visible(topborder)
    ax.spines['right'].set_visible(rightborder)

    plt.tight_layout()

    return ax

# Cell
def plot_nrmse_curve(fig, ax, report, baseline=None, linewidth=1, linecolor='b', **kwargs):
    """
    nRMSE per timestep, optionally against the persistence baseline.
    """
    ax.plot(report.curve.index, report.curve.values, color=linecolor, linewidth=linewidth)
    legend = ['Model']
    if baseline is not None:
        ax.plot(baseline.curve.index, baseline.curve.values, color='k', linestyle='--', linewidth=linewidth)
        legend.append('Persistence')
    ax.axvline(report.th - 0.5, color='grey', linewidth=0.5)

    if kwargs.get('legend') is None:
        kwargs['legend'] = legend
    kwargs.setdefault('xlabel', 'timestep')
    kwargs.setdefault('ylabel', 'nRMSE')
    return ax_style(ax, **kwargs)

# Cell
def plot_field_comparison(fig, axes, pred, gt, t, z=-1, cmap='viridis', title=None):
    """
    Heatmaps of the ground truth, the prediction and their difference at frame `t`. 3-D fields are cut at
    z-layer `z`.
    """
    g, p = np.asarray(gt[t]), np.asarray(pred[t])
    if g.ndim == 3:
        g, p = g[..., z], p[..., z]
    lo, hi = min(g.min(), p.min()), max(g.max(), p.max())
    sns.heatmap(g.T, vmin=lo, vmax=hi, cmap=cmap, square=True, ax=axes[0], xticklabels=False, yticklabels=False)
    sns.heatmap(p.T, vmin=lo, vmax=hi, cmap=cmap, square=True, ax=axes[1], xticklabels=False, yticklabels=False)
    diff = p - g
    m = max(np.abs(diff).max(), 1e-12)
    sns.heatmap(diff.T, vmin=-m, vmax=m, center=0, cmap=sns.diverging_palette(10, 240, as_cmap=True), square=True,
                ax=axes[2], xticklabels=False, yticklabels=False)
    for ax, name in zip(axes, ['Ground truth', 'Prediction', 'Difference']):
        ax.invert_yaxis()
        ax.set_title(name if title is None else '{} {}'.format(title, name.lower()))
    return axes


def plot_melt_pool(fig, ax, depth, linewidth=1, **kwargs):
    """Melt pool depth over time from `compare_melt_pool`."""
    ax.plot(depth.t, depth.depth_gt, color='k', linewidth=linewidth)
    ax.plot(depth.t, depth.depth_pred, color='r', linestyle='--', linewidth=linewidth)
    kwargs.setdefault('legend', ['Ground truth', 'Prediction'])
    kwargs.setdefault('xlabel', 'timestep')
    kwargs.setdefault('ylabel', 'depth')
    return ax_style(ax, **kwargs)


def plot_loss(fig, ax, curve, column='loss', logy=True, **kwargs):
    ax.plot(curve.epoch, curve[column])
    if logy:
        ax.set_yscale('log')
    kwargs.setdefault('xlabel', 'epoch')
    kwargs.setdefault('ylabel', column)
    return ax_style(ax, **kwargs)

# Cell
def save_eval_plots(report, baseline, preds, gts, directory, suffix='', depth=None):
    """
    Write the nRMSE curve, the melt pool depth when given and, for the first test sample, a comparison of
    every field at its last frame.
    """
    os.makedirs(directory, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    plot_nrmse_curve(fig, ax, report, baseline)
    fig.savefig(os.path.join(directory, 'nrmse{}.png'.format(suffix)))
    plt.close(fig)

    if depth is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        plot_melt_pool(fig, ax, depth[depth['sample'] == 0])
        fig.savefig(os.path.join(directory, 'melt_pool{}.png'.format(suffix)))
        plt.close(fig)

    if not preds:
        return
    for name in sorted(gts[0]):
        fig, axes = plt.subplots(1, 3, figsize=(12, 4))
        last = gts[0][name].shape[0] - 1
        plot_field_comparison(fig, axes, preds[0][name], gts[0][name], last, title=name)
        fig.savefig(os.path.join(directory, 'field_{}{}.png'.format(name, suffix)))
        plt.close(fig)
