"""Masked-channel reconstruction pre-training.

IMU rows and the polar phase rows are treated as joint observations of
the same locomotion process: whole channels are zeroed at random and an
encoder-decoder (sharing the estimator's embedding and encoder weights by
name) reconstructs them, scored only on the masked channels. After
pre-training, the embedding, positional code, and encoder transfer into a
fresh estimator whose head is newly initialized.

Ablation variants:
  * no_decoder      - reconstruct straight from the encoder output (WDL)
  * feature_recon   - score decoder token features against the embedding
                      features of the unmasked input, masked channels
                      only, target detached (FVR)
  * mask_2d         - mask (channel, time-block) cells instead of whole
                      channels (NCLM)
  * no_phase_rows   - pre-train and fine-tune on the 21 IMU rows only
                      (WPSV)
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .data.recording import Recording
from .data.windows import (
    MaskSpec,
    NormStats,
    batch_block_masks,
    batch_channel_masks,
    build_windows,
    fit_norm_stats,
    stack_windows,
)
from .fitting import FitConfig, FitResult, fit
from .model.checkpoint import save_checkpoint
from .model.config import TctstConfig
from .model.tctst import TctstModel, make_embedding, PositionalEncoding
from .numerics.modules import Linear, Module, TransformerStack
from .numerics.rng import RngStream

TRANSFER_PREFIXES = ("embed.", "pos.", "encoder.")


@dataclass
class PretrainConfig:
    mask_ratio: float = 0.3        # fraction of channels masked per sample
    window_stride: int = 10        # sliding-window stride for pre-training data
    no_decoder: bool = False       # WDL
    feature_recon: bool = False    # FVR
    mask_2d: bool = False          # NCLM
    block_len: int = 10
    no_phase_rows: bool = False    # WPSV

    def validate(self) -> "PretrainConfig":
        if not 0.0 < self.mask_ratio < 1.0:
            raise ValueError(f"mask ratio must be in (0, 1), got {self.mask_ratio}")
        if self.window_stride < 1:
            raise ValueError("window stride must be >= 1")
        return self

    @property
    def variant(self) -> str:
        flags = [self.no_decoder, self.feature_recon, self.mask_2d, self.no_phase_rows]
        names = ["wdl", "fvr", "nclm", "wpsv"]
        active = [n for n, f in zip(names, flags) if f]
        return "+".join(active) if active else "proposed"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "PretrainConfig":
        return cls(**d).validate()


class PretrainModel(Module):
    """Encoder-decoder for masked reconstruction.

    The embedding / positional / encoder parameter names are identical to
    the estimator's so transfer is a by-name copy; the decoder (another
    transformer stack of the same depth) and the per-token reconstruction
    map exist only here.
    """

    kind = "pretrain"

    def __init__(self, cfg: TctstConfig, pre_cfg: PretrainConfig, seed: int = 0):
        super().__init__()
        cfg.validate()
        pre_cfg.validate()
        self.cfg = cfg
        self.pre_cfg = pre_cfg
        self.seed = seed
        dtype = cfg.np_dtype
        rng = RngStream(seed).spawn("init")
        self.embed = self._child(make_embedding(cfg, rng, "embed", dtype))
        self.pos = self._child(PositionalEncoding(cfg.n_channels, cfg.emb_dim, rng, "pos",
                                                  dtype, cfg.pos_enc))
        self.encoder = self._child(TransformerStack(cfg.n_layers, cfg.emb_dim, cfg.n_head,
                                                    cfg.mlp_ratio, rng, "encoder", dtype,
                                                    cfg.qkv_bias))
        self.decoder = None
        if not pre_cfg.no_decoder:
            self.decoder = self._child(TransformerStack(cfg.n_layers, cfg.emb_dim, cfg.n_head,
                                                        cfg.mlp_ratio, rng, "decoder", dtype,
                                                        cfg.qkv_bias))
        self.recon = None
        if not pre_cfg.feature_recon:
            self.recon = self._child(Linear(cfg.emb_dim, cfg.window_len, rng, "recon", dtype))

    def embed_features(self, x, training=False):
        """Embedding-layer token features (no positional code)."""
        return self.embed(x.astype(self.cfg.np_dtype, copy=False), training)

    def forward(self, x, training=False):
        """[B, C, L] masked input -> [B, C, L] reconstruction, or token
        features [B, C, emb] for the feature-reconstruction variant."""
        h = self.embed_features(x, training)
        h = self.encoder(self.pos(h, training), training)
        if self.decoder is not None:
            h = self.decoder(h, training)
        if self.recon is not None:
            h = self.recon(h, training)
        return h

    def backward(self, gy):
        if self.recon is not None:
            gy = self.recon.backward(gy)
        if self.decoder is not None:
            gy = self.decoder.backward(gy)
        g = self.pos.backward(self.encoder.backward(gy))
        return self.embed.backward(g)


# ---------------------------------------------------------------------------
# reconstruction losses
# ---------------------------------------------------------------------------

def reconstruction_loss(recon: np.ndarray, original: np.ndarray, mask: MaskSpec) -> float:
    """Masked-channel reconstruction loss for one window.

    Mean over masked channels of the per-channel mean squared error;
    unmasked rows never contribute. For block masks the outer mean runs
    over masked (channel, block) cells instead.
    """
    if mask.blocks is not None:
        rows, cols = mask.blocks[:, 0], mask.blocks[:, 1]
        if rows.size == 0:
            raise ValueError("empty mask")
        bl = mask.block_len
        total = 0.0
        for r, b in zip(rows, cols):
            seg = slice(b * bl, (b + 1) * bl)
            d = recon[r, seg] - original[r, seg]
            total += float(np.mean(d * d))
        return total / rows.size
    if mask.channels.size == 0:
        raise ValueError("empty mask")
    d = recon[mask.channels] - original[mask.channels]
    return float(np.mean(d * d, axis=1).mean())


def masked_mse_batch(recon: np.ndarray, original: np.ndarray,
                     mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Batched masked loss and its gradient wrt the reconstruction.

    mask is boolean [B, C] (channel masking) or [B, C, n_blocks] (block
    masking, where window_len % n_blocks == 0). Every sample carries the
    same number of masked cells, so the batch loss is the mean over
    samples of the per-sample masked loss.
    """
    b, c, length = recon.shape
    diff = recon.astype(np.float64) - original.astype(np.float64)
    if mask.ndim == 2:
        per_cell = mask.sum(axis=1)
        if np.any(per_cell == 0):
            raise ValueError("empty mask in batch")
        weight = mask[:, :, None] / (per_cell[:, None, None] * length * b)
    else:
        n_blocks = mask.shape[2]
        expanded = np.repeat(mask, length // n_blocks, axis=2)
        per_cell = mask.sum(axis=(1, 2))
        if np.any(per_cell == 0):
            raise ValueError("empty mask in batch")
        weight = expanded / (per_cell[:, None, None] * (length // n_blocks) * b)
    loss = float(np.sum(weight * diff * diff))
    grad = (2.0 * weight * diff).astype(recon.dtype)
    return loss, grad


# ---------------------------------------------------------------------------
# pre-training run
# ---------------------------------------------------------------------------

@dataclass
class PretrainResult:
    model: PretrainModel
    norm_stats: NormStats
    fit: FitResult
    checkpoint_dir: Path | None


def pretrain_windows(recordings: list[Recording], cfg: TctstConfig,
                     pre_cfg: PretrainConfig, stats: NormStats) -> np.ndarray:
    """Stacked [N, C, L] pre-training inputs (targets are the inputs)."""
    mode = "none" if pre_cfg.no_phase_rows else "truth"
    xs = []
    for rec in recordings:
        ws = build_windows(rec, cfg.window_len, pre_cfg.window_stride, mode, stats)
        xs.append(stack_windows(ws)[0])
    return np.concatenate(xs)


def adapt_model_config(cfg: TctstConfig, pre_cfg: PretrainConfig) -> TctstConfig:
    """Drop the phase rows from the channel count for the IMU-only variant."""
    if pre_cfg.no_phase_rows and cfg.n_channels != 21:
        return replace(cfg, n_channels=21)
    return cfg


def pretrain_run(train_recs: list[Recording], val_recs: list[Recording],
                 cfg: TctstConfig, pre_cfg: PretrainConfig, fit_cfg: FitConfig,
                 seed: int, out_dir=None) -> PretrainResult:
    """Pre-train on masked windows and return the best-validation model."""
    cfg = adapt_model_config(cfg, pre_cfg)
    stats = fit_norm_stats(train_recs)
    x_train = pretrain_windows(train_recs, cfg, pre_cfg, stats)
    x_val = pretrain_windows(val_recs, cfg, pre_cfg, stats)

    model = PretrainModel(cfg, pre_cfg, seed)
    rng = RngStream(seed).spawn("pretrain")
    mask_rng = rng.spawn("mask")
    c = cfg.n_channels

    def draw_masks(n, stream):
        if pre_cfg.mask_2d:
            return batch_block_masks(n, c, cfg.window_len, pre_cfg.block_len,
                                     pre_cfg.mask_ratio, stream)
        return batch_channel_masks(n, c, pre_cfg.mask_ratio, stream)

    # fixed validation masks so early stopping tracks a stable objective
    val_masks = draw_masks(x_val.shape[0], rng.spawn("valmask"))
    x_val_masked = _apply_masks(x_val, val_masks)

    def batch_loss(x, masks, training):
        x_masked = _apply_masks(x, masks)
        if pre_cfg.feature_recon:
            target = model.embed_features(x)          # detached: no backward path
            out = model.forward(x_masked, training)
            loss, grad = masked_mse_batch(out, target, _channel_mask_of(masks))
        else:
            out = model.forward(x_masked, training)
            loss, grad = masked_mse_batch(out, x, masks)
        return loss, grad

    def train_batch(idx):
        masks = draw_masks(len(idx), mask_rng)
        loss, grad = batch_loss(x_train[idx], masks, True)
        model.backward(grad)
        return loss

    def val_loss():
        total = 0.0
        n = x_val.shape[0]
        for start in range(0, n, fit_cfg.batch_size):
            sl = slice(start, min(start + fit_cfg.batch_size, n))
            if pre_cfg.feature_recon:
                target = model.embed_features(x_val[sl])
                out = model.forward(x_val_masked[sl], False)
                loss, _ = masked_mse_batch(out, target, _channel_mask_of(val_masks[sl]))
            else:
                out = model.forward(x_val_masked[sl], False)
                loss, _ = masked_mse_batch(out, x_val[sl], val_masks[sl])
            total += loss * (sl.stop - sl.start)
        return total / n

    log_path = Path(out_dir) / "train_log.jsonl" if out_dir else None
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    result = fit(model, x_train.shape[0], train_batch, val_loss, fit_cfg,
                 rng.spawn("shuffle"), log_path)

    ckpt_dir = None
    if out_dir:
        ckpt_dir = save_checkpoint(Path(out_dir) / "checkpoint", model, stats,
                                   extra={"best_epoch": result.best_epoch,
                                          "best_val": result.best_val})
    return PretrainResult(model=model, norm_stats=stats, fit=result, checkpoint_dir=ckpt_dir)


def _apply_masks(x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    out = x.copy()
    if masks.ndim == 2:
        out[masks] = 0
    else:
        n, c, n_blocks = masks.shape
        expanded = np.repeat(masks, x.shape[2] // n_blocks, axis=2)
        out[expanded] = 0
    return out


def _channel_mask_of(masks: np.ndarray) -> np.ndarray:
    """Reduce a block mask to 'channel touched' for feature-level scoring."""
    return masks if masks.ndim == 2 else masks.any(axis=2)


# ---------------------------------------------------------------------------
# weight transfer
# ---------------------------------------------------------------------------

def transfer_weights(source, fresh: TctstModel) -> TctstModel:
    """Copy embedding + positional + encoder weights into a fresh estimator.

    ``source`` is a PretrainModel, a checkpoint directory, or a name->array
    mapping. The head keeps its fresh initialization; decoder and
    reconstruction parameters are never transferred. Raises on any
    missing name or shape mismatch.
    """
    if isinstance(source, (str, Path)):
        from .model.checkpoint import load_checkpoint

        source = load_checkpoint(source)[0]
    if isinstance(source, Module):
        source = {p.name: p.value for p in source.parameters()}

    for p in fresh.parameters():
        if not p.name.startswith(TRANSFER_PREFIXES):
            continue
        if p.name not in source:
            raise ValueError(f"pre-trained weights missing {p.name}")
        src = source[p.name]
        if src.shape != p.value.shape:
            raise ValueError(f"shape mismatch for {p.name}: {src.shape} vs {p.value.shape}")
        p.value[...] = src.astype(p.value.dtype)
    return fresh
