"""Adam optimizer and the warmup-then-plateau learning-rate schedule."""
from __future__ import annotations

import math

import numpy as np

from .modules import Parameter


class AdamState:
    """Per-parameter first/second moment buffers plus the step counter."""

    def __init__(self, params: list[Parameter], base_lr: float = 6e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in model")
        self.params = params
        self.base_lr = base_lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]


def adam_step(opt: AdamState, lr_factor: float = 1.0):
    """One bias-corrected Adam update from the gradients currently held."""
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    lr = opt.base_lr * lr_factor
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, m, v in zip(opt.params, opt.m, opt.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.value -= (lr / c1) * m / (np.sqrt(v / c2) + opt.eps)


def lr_factor(epoch: int, val_loss_history=(), *, warmup_epochs: int = 20,
              plateau_patience: int = 10, floor: float = 0.1,
              start: float = 0.2) -> float:
    """Learning-rate scaling factor for the given epoch.

    Epochs 0..warmup ramp the factor from ``start`` to 1.0 along a half
    cosine. Past warmup, the factor halves every time the validation loss
    has not improved for ``plateau_patience`` consecutive epochs, floored
    at ``floor``. ``val_loss_history`` holds the losses of completed
    epochs (index = epoch).
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch <= warmup_epochs:
        return start + (1.0 - start) * (1.0 - math.cos(math.pi * epoch / warmup_epochs)) / 2.0
    factor = 1.0
    best = math.inf
    since = 0
    for i, loss in enumerate(val_loss_history[:epoch]):
        if loss < best:
            best = loss
            since = 0
        else:
            since += 1
        if i >= warmup_epochs and since >= plateau_patience:
            factor = max(floor, factor / 2.0)
            since = 0
    return factor
