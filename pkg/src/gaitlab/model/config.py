"""Architecture configuration for the channel-token transformer."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

EMBEDDING_VARIANTS = ("tcn", "mlp", "patch")
POS_ENC_MODES = ("scalar", "full")


@dataclass
class TctstConfig:
    n_channels: int = 24           # C: 21 IMU + 3 phase rows
    window_len: int = 100          # L_B
    emb_dim: int = 384
    n_head: int = 8
    n_layers: int = 8              # transformer encoder depth
    mlp_ratio: float = 4.0
    latent_dim: int = 128          # head hidden width
    head_dropout: float = 0.1
    qkv_bias: bool = True
    embedding: str = "tcn"
    pos_enc: str = "scalar"        # scalar p[C] broadcast, or a full [C, emb] table
    dtype: str = "float32"

    def validate(self) -> "TctstConfig":
        if self.emb_dim % self.n_head != 0:
            raise ValueError(f"emb_dim {self.emb_dim} not divisible by n_head {self.n_head}")
        hidden = self.emb_dim * self.mlp_ratio
        if abs(hidden - round(hidden)) > 1e-9:
            raise ValueError(f"mlp_ratio * emb_dim = {hidden} is not integral")
        if self.embedding not in EMBEDDING_VARIANTS:
            raise ValueError(f"embedding must be one of {EMBEDDING_VARIANTS}")
        if self.pos_enc not in POS_ENC_MODES:
            raise ValueError(f"pos_enc must be one of {POS_ENC_MODES}")
        if self.embedding == "tcn" and self.window_len % 4 != 0:
            raise ValueError("tcn embedding needs window_len divisible by 4")
        if self.embedding == "patch" and self.window_len % 10 != 0:
            raise ValueError("patch embedding needs window_len divisible by 10")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"unsupported dtype {self.dtype}")
        return self

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TctstConfig":
        return cls(**d).validate()
