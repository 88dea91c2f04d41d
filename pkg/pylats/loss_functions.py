__all__ = ['rel_l2', 'frame_norms', 'nrmse_terms']

# Internal Cell
#exporti
import numpy as np

# Cell
def rel_l2(y, f):
    """
    Relative L2 error ||y - f|| / ||y|| over all entries, as used for reconstruction checks.

    :param y: Reference values
    :param f: Reconstruction
    :return: Relative L2 error (inf when y is identically zero and f is not)
    """

    y = np.ravel(y).astype(np.float64)
    f = np.ravel(f).astype(np.float64)
    num = np.linalg.norm(y - f)
    den = np.linalg.norm(y)
    if den == 0:
        return 0. if num == 0 else np.inf
    return num / den

# Cell
def frame_norms(u):
    """
    L2 norm of every frame of a series (N_t, ...), each frame flattened over all grid cells.
    """

    u = np.asarray(u, dtype=np.float64)
    return np.sqrt(np.sum(u.reshape(u.shape[0], -1) ** 2, axis=1))

# Cell
def nrmse_terms(pred, gt):
    """
    Per-frame normalized error ||pred_t - gt_t|| / ||gt_t||.

    .. math:: e_t = \\frac{\\| u^{pred}_t - u^{gt}_t \\|_2}{\\| u^{gt}_t \\|_2}

    Frames whose ground truth norm is zero come back as NaN so the caller can flag and drop them.

    :param pred: Predicted series (N_t, ...)
    :param gt: Ground truth series of the same shape
    :return: Array of N_t normalized errors
    """

    num = frame_norms(np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64))
    den = frame_norms(gt)
    out = np.full(den.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out
