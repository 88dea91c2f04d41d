__all__ = ['Adam', 'adam_step', 'grad_check', 'snapshot', 'restore']

# Internal Cell
#exporti
import numpy as np

from . import tensor as T
from .shared import NumericalError

# Cell
class Adam:
    """
    Adam with bias correction. Moment state is keyed by parameter id and advanced once per `step`.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError('Error: learning rate must be positive, got ' + str(lr))
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {p.id: np.zeros_like(p.value) for p in self.params}
        self.v = {p.id: np.zeros_like(p.value) for p in self.params}

    def step(self):
        for p in self.params:
            if not np.all(np.isfinite(p.gradient)):
                raise NumericalError('Error: non-finite gradient in parameter ' + p.id, where=p.id)

        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1. - b1 ** self.t, 1. - b2 ** self.t
        for p in self.params:
            g = p.gradient
            self.m[p.id] = b1 * self.m[p.id] + (1. - b1) * g
            self.v[p.id] = b2 * self.v[p.id] + (1. - b2) * g * g
            p.value = p.value - self.lr * (self.m[p.id] / c1) / (np.sqrt(self.v[p.id] / c2) + self.eps)

    def zero_grad(self):
        T.zero_grad(self.params)

# Cell
def adam_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, state=None):
    """
    One Adam update on `params`. Pass the returned optimizer back in as `state` to keep the moments.
    """
    opt = state if state is not None else Adam(params, lr, beta1, beta2, eps)
    opt.step()
    return opt

# Cell
def grad_check(params, forward, probe_input, h=1e-5, n_samples=64, seed=0):
    """
    Largest relative error between backward gradients and central differences of `forward(probe_input)`,
    over up to `n_samples` randomly chosen parameter entries.
    """
    if not 0 < h <= 1e-2:
        raise ValueError('Error: h must lie in (0, 1e-2], got ' + str(h))
    params = list(params)
    T.zero_grad(params)
    T.backward(forward(probe_input))
    analytic = {p.id: p.gradient.copy() for p in params}

    entries = [(i, j) for i, p in enumerate(params) for j in range(p.value.size)]
    rng = np.random.default_rng(seed)
    if len(entries) > n_samples:
        entries = [entries[k] for k in rng.choice(len(entries), n_samples, replace=False)]

    worst = 0.
    with T.no_grad():
        for i, j in entries:
            p = params[i]
            flat = p.value.reshape(-1)
            orig = flat[j]
            flat[j] = orig + h
            f_plus = forward(probe_input).value.item()
            flat[j] = orig - h
            f_minus = forward(probe_input).value.item()
            flat[j] = orig
            cd = (f_plus - f_minus) / (2. * h)
            a = analytic[p.id].reshape(-1)[j]
            worst = max(worst, abs(a - cd) / max(abs(a), abs(cd), 1e-8))
    T.zero_grad(params)
    return worst

# Internal Cell
def snapshot(params):
    return {p.id: p.value.copy() for p in params}


def restore(params, snap):
    for p in params:
        p.value = snap[p.id].copy()
