"""The gait phase estimation network: channel-wise embedding, channel-token
transformer encoder, mean pooling, and the regression head.

Channels are the token axis: each of the C input channels is embedded
independently (shared weights), a learnable per-channel scalar is added
as the positional code, the token sequence passes through the encoder
stack, tokens are mean-pooled, and a two-layer head maps to the 3-d polar
phase state.
"""
from __future__ import annotations

import numpy as np

from ..numerics.modules import (
    Conv1d,
    Dropout,
    Linear,
    MaxPool1d,
    Module,
    ReLU,
    TransformerStack,
)
from ..numerics.rng import RngStream
from .config import TctstConfig

MLP_HIDDEN = 192       # width of the MLP embedding variant's first layer
PATCH_LEN = 10         # patch length of the patch embedding variant
PATCH_PROJ = 32        # per-patch projection width


class ChannelEmbedding(Module):
    """Shared-weight per-channel map from [B, C, L] to [B, C, emb] tokens.

    Channels are folded into the batch axis, so weights are shared across
    channels and each output token depends on its own channel only.
    """

    def forward(self, x, training=False):
        b, c, length = x.shape
        flat = np.ascontiguousarray(x).reshape(b * c, length)
        y = self._embed(flat, training)
        return y.reshape(b, c, -1)

    def backward(self, gy):
        b, c, emb = gy.shape
        gx = self._embed_backward(np.ascontiguousarray(gy).reshape(b * c, emb))
        return gx.reshape(b, c, -1)


class TcnEmbed(ChannelEmbedding):
    """conv(1->32) -> ReLU -> pool2 -> conv(32->64) -> ReLU -> pool2 -> linear.

    Runs channels-last internally ([rows, L, feat]) so the conv GEMMs and
    pooling touch contiguous memory.
    """

    def __init__(self, window_len, emb_dim, rng, prefix, dtype):
        super().__init__(prefix)
        if window_len % 4 != 0:
            raise ValueError("window length must be divisible by 4")
        self.conv1 = self._child(Conv1d(1, 32, 3, rng, f"{prefix}.conv1", padding=1,
                                        dtype=dtype, channels_last=True))
        self.act1 = self._child(ReLU())
        self.pool1 = self._child(MaxPool1d(2, channels_last=True))
        self.conv2 = self._child(Conv1d(32, 64, 3, rng, f"{prefix}.conv2", padding=1,
                                        dtype=dtype, channels_last=True))
        self.act2 = self._child(ReLU())
        self.pool2 = self._child(MaxPool1d(2, channels_last=True))
        self.flat_dim = 64 * (window_len // 4)
        self.proj = self._child(Linear(self.flat_dim, emb_dim, rng, f"{prefix}.proj", dtype))

    def _embed(self, flat, training):
        h = flat[:, :, None]                                   # [B*C, L, 1]
        h = self.pool1(self.act1(self.conv1(h, training), training), training)
        h = self.pool2(self.act2(self.conv2(h, training), training), training)
        self._pool_shape = h.shape
        return self.proj(h.reshape(h.shape[0], -1), training)

    def _embed_backward(self, gy):
        g = self.proj.backward(gy).reshape(self._pool_shape)
        g = self.conv2.backward(self.act2.backward(self.pool2.backward(g)))
        g = self.conv1.backward(self.act1.backward(self.pool1.backward(g)))
        return g[:, :, 0]


class MlpEmbed(ChannelEmbedding):
    """linear(L -> 192) -> ReLU -> linear(192 -> emb), per channel."""

    def __init__(self, window_len, emb_dim, rng, prefix, dtype):
        super().__init__(prefix)
        self.fc1 = self._child(Linear(window_len, MLP_HIDDEN, rng, f"{prefix}.fc1", dtype))
        self.act = self._child(ReLU())
        self.fc2 = self._child(Linear(MLP_HIDDEN, emb_dim, rng, f"{prefix}.fc2", dtype))

    def _embed(self, flat, training):
        return self.fc2(self.act(self.fc1(flat, training), training), training)

    def _embed_backward(self, gy):
        return self.fc1.backward(self.act.backward(self.fc2.backward(gy)))


class PatchEmbed(ChannelEmbedding):
    """Non-overlapping length-10 patches -> linear(10->32) each -> concat
    -> ReLU -> linear(-> emb), per channel with shared weights."""

    def __init__(self, window_len, emb_dim, rng, prefix, dtype):
        super().__init__(prefix)
        if window_len % PATCH_LEN != 0:
            raise ValueError(f"window length must be divisible by {PATCH_LEN}")
        self.n_patches = window_len // PATCH_LEN
        self.patch_proj = self._child(Linear(PATCH_LEN, PATCH_PROJ, rng, f"{prefix}.patch_proj", dtype))
        self.act = self._child(ReLU())
        self.out = self._child(Linear(self.n_patches * PATCH_PROJ, emb_dim, rng, f"{prefix}.out", dtype))

    def _embed(self, flat, training):
        n = flat.shape[0]
        patches = flat.reshape(n, self.n_patches, PATCH_LEN)
        h = self.patch_proj(patches, training).reshape(n, -1)
        return self.out(self.act(h, training), training)

    def _embed_backward(self, gy):
        g = self.act.backward(self.out.backward(gy))
        g = g.reshape(g.shape[0], self.n_patches, PATCH_PROJ)
        return self.patch_proj.backward(g).reshape(g.shape[0], -1)


class PositionalEncoding(Module):
    """Learnable per-channel code added to every embedding dimension.

    The literal design is a scalar per channel broadcast across the
    embedding axis; ``mode="full"`` upgrades it to a [C, emb] table.
    """

    def __init__(self, n_channels, emb_dim, rng, prefix, dtype, mode="scalar"):
        super().__init__(prefix)
        self.mode = mode
        if mode == "scalar":
            self.p = self._register("p", np.zeros(n_channels, dtype=dtype))
        elif mode == "full":
            self.p = self._register("p", np.zeros((n_channels, emb_dim), dtype=dtype))
        else:
            raise ValueError(f"unknown positional mode {mode}")

    def forward(self, x, training=False):
        if self.mode == "scalar":
            return x + self.p.value[None, :, None]
        return x + self.p.value[None]

    def backward(self, gy):
        if self.mode == "scalar":
            self.p.grad += gy.sum(axis=(0, 2))
        else:
            self.p.grad += gy.sum(axis=0)
        return gy


class Head(Module):
    """Shared regression head: linear -> ReLU -> dropout -> linear(-> 3)."""

    def __init__(self, emb_dim, latent_dim, dropout_rate, rng, drop_rng, prefix, dtype):
        super().__init__(prefix)
        self.fc1 = self._child(Linear(emb_dim, latent_dim, rng, f"{prefix}.fc1", dtype))
        self.act = self._child(ReLU())
        self.drop = self._child(Dropout(dropout_rate, drop_rng))
        self.fc2 = self._child(Linear(latent_dim, 3, rng, f"{prefix}.fc2", dtype))

    def forward(self, x, training=False):
        return self.fc2(self.drop(self.act(self.fc1(x, training), training), training), training)

    def backward(self, gy):
        return self.fc1.backward(self.act.backward(self.drop.backward(self.fc2.backward(gy))))


class MeanPoolChannels(Module):
    def forward(self, x, training=False):
        self._n = x.shape[1]
        return x.mean(axis=1)

    def backward(self, gy):
        g = gy / gy.dtype.type(self._n)
        return np.repeat(g[:, None, :], self._n, axis=1)


def make_embedding(cfg: TctstConfig, rng, prefix, dtype) -> ChannelEmbedding:
    if cfg.embedding == "tcn":
        return TcnEmbed(cfg.window_len, cfg.emb_dim, rng, prefix, dtype)
    if cfg.embedding == "mlp":
        return MlpEmbed(cfg.window_len, cfg.emb_dim, rng, prefix, dtype)
    return PatchEmbed(cfg.window_len, cfg.emb_dim, rng, prefix, dtype)


class TctstModel(Module):
    """Full estimator: x [B, C, L] float -> polar phase state [B, 3]."""

    kind = "tctst"

    def __init__(self, cfg: TctstConfig, seed: int = 0):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        dtype = cfg.np_dtype
        rng = RngStream(seed).spawn("init")
        self.dropout_rng = RngStream(seed).spawn("dropout")
        self.embed = self._child(make_embedding(cfg, rng, "embed", dtype))
        self.pos = self._child(PositionalEncoding(cfg.n_channels, cfg.emb_dim, rng, "pos",
                                                  dtype, cfg.pos_enc))
        self.encoder = self._child(TransformerStack(cfg.n_layers, cfg.emb_dim, cfg.n_head,
                                                    cfg.mlp_ratio, rng, "encoder", dtype,
                                                    cfg.qkv_bias))
        self.pool = self._child(MeanPoolChannels())
        self.head = self._child(Head(cfg.emb_dim, cfg.latent_dim, cfg.head_dropout,
                                     rng, self.dropout_rng, "head", dtype))

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[1] != self.cfg.n_channels or x.shape[2] != self.cfg.window_len:
            raise ValueError(f"expected [B, {self.cfg.n_channels}, {self.cfg.window_len}], "
                             f"got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite values in model input")
        h = self.embed(x.astype(self.cfg.np_dtype, copy=False), training)
        h = self.encoder(self.pos(h, training), training)
        return self.head(self.pool(h, training), training)

    def backward(self, gy):
        g = self.pool.backward(self.head.backward(gy))
        return self.embed.backward(self.pos.backward(self.encoder.backward(g)))

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        """Eval-mode forward in chunks; returns [N, 3] float64."""
        outs = []
        for i in range(0, x.shape[0], batch_size):
            outs.append(self.forward(x[i:i + batch_size], training=False))
        return np.concatenate(outs).astype(np.float64)
