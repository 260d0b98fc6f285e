"""Time-patch transformer baseline.

Unlike the channel-token network, tokens here are non-overlapping time
patches of length 10 spanning all channels: each patch is flattened,
projected to the embedding width, given a learnable per-patch positional
embedding, encoded, mean-pooled over patches, and mapped through the
same head shape.
"""
from __future__ import annotations

import numpy as np

from ..numerics.modules import Linear, Module, TransformerStack
from ..numerics.rng import RngStream
from .config import TctstConfig
from .tctst import Head, MeanPoolChannels

PATCH_LEN = 10


class PatchTstModel(Module):
    kind = "patchtst"

    def __init__(self, cfg: TctstConfig, seed: int = 0):
        super().__init__()
        cfg.validate()
        if cfg.window_len % PATCH_LEN != 0:
            raise ValueError(f"window length must be divisible by {PATCH_LEN}")
        self.cfg = cfg
        self.seed = seed
        dtype = cfg.np_dtype
        rng = RngStream(seed).spawn("init")
        self.dropout_rng = RngStream(seed).spawn("dropout")
        self.n_patches = cfg.window_len // PATCH_LEN
        patch_dim = cfg.n_channels * PATCH_LEN
        self.proj = self._child(Linear(patch_dim, cfg.emb_dim, rng, "patch.proj", dtype))
        self.pos = self._register("patch.pos",
                                  np.zeros((self.n_patches, cfg.emb_dim), dtype=dtype))
        self.encoder = self._child(TransformerStack(cfg.n_layers, cfg.emb_dim, cfg.n_head,
                                                    cfg.mlp_ratio, rng, "encoder", dtype,
                                                    cfg.qkv_bias))
        self.pool = self._child(MeanPoolChannels())
        self.head = self._child(Head(cfg.emb_dim, cfg.latent_dim, cfg.head_dropout,
                                     rng, self.dropout_rng, "head", dtype))

    def _patchify(self, x):
        b, c, length = x.shape
        # [B, C, P, len] -> [B, P, C*len], patch p holds all channels
        p = x.reshape(b, c, self.n_patches, PATCH_LEN).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(p).reshape(b, self.n_patches, -1)

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[1] != self.cfg.n_channels or x.shape[2] != self.cfg.window_len:
            raise ValueError(f"expected [B, {self.cfg.n_channels}, {self.cfg.window_len}], "
                             f"got {x.shape}")
        self._in_shape = x.shape
        tokens = self.proj(self._patchify(x.astype(self.cfg.np_dtype, copy=False)), training)
        tokens = tokens + self.pos.value[None]
        return self.head(self.pool(self.encoder(tokens, training), training), training)

    def backward(self, gy):
        g = self.encoder.backward(self.pool.backward(self.head.backward(gy)))
        self.pos.grad += g.sum(axis=0)
        g = self.proj.backward(g)
        b, c, length = self._in_shape
        g = g.reshape(b, self.n_patches, c, PATCH_LEN).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(g).reshape(b, c, length)

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        outs = []
        for i in range(0, x.shape[0], batch_size):
            outs.append(self.forward(x[i:i + batch_size], training=False))
        return np.concatenate(outs).astype(np.float64)
