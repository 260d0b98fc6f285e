"""Shared epoch-loop engine for pre-training and fine-tuning.

The engine owns shuffling, batching, the optimizer and learning-rate
schedule, best-checkpoint snapshots, early stopping, and the JSON-lines
training log; callers supply a ``train_batch(indices) -> loss`` closure
that populates parameter gradients and a ``val_loss()`` closure. A NaN
loss aborts immediately with a diagnostic rather than training on.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics.optim import AdamState, adam_step, lr_factor
from .numerics.rng import RngStream


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class FitConfig:
    epochs: int = 100
    batch_size: int = 1024
    base_lr: float = 6e-4
    warmup_epochs: int = 20
    plateau_patience: int = 10
    lr_floor: float = 0.1
    early_stop_patience: int = 10

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class FitResult:
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def fit(model, n_train: int, train_batch, val_loss, cfg: FitConfig,
        rng: RngStream, log_path=None) -> FitResult:
    """Run the training loop and leave the best-validation weights in place."""
    params = model.parameters()
    opt = AdamState(params, base_lr=cfg.base_lr)
    result = FitResult()
    best_weights = None
    since_best = 0
    log_fh = Path(log_path).open("w") if log_path else None

    try:
        val_hist: list[float] = []
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            factor = lr_factor(epoch, val_hist, warmup_epochs=cfg.warmup_epochs,
                               plateau_patience=cfg.plateau_patience, floor=cfg.lr_floor)
            order = rng.permutation(n_train)
            losses = []
            for start in range(0, n_train, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                model.zero_grad()
                loss = train_batch(idx)
                if not math.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite training loss {loss} at epoch {epoch}, "
                        f"batch starting {start} (lr_factor={factor:.3f})")
                adam_step(opt, factor)
                losses.append(loss)
            train_loss = float(np.mean(losses))
            vl = float(val_loss())
            if not math.isfinite(vl):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
            val_hist.append(vl)

            record = {"epoch": epoch, "train_loss": train_loss, "val_loss": vl,
                      "lr_factor": factor,
                      "wall_ms": (time.perf_counter() - t0) * 1e3}
            result.history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()

            if vl < result.best_val:
                result.best_val = vl
                result.best_epoch = epoch
                best_weights = [p.value.copy() for p in params]
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break
    finally:
        if log_fh:
            log_fh.close()

    if best_weights is not None:
        for p, w in zip(params, best_weights):
            p.value[...] = w
    return result
