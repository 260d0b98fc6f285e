"""The channel-token transformer, baselines, and checkpointing."""
from .checkpoint import CheckpointError, load_checkpoint, load_manifest, save_checkpoint
from .config import TctstConfig
from .patchtst import PatchTstModel
from .tctst import (
    MlpEmbed,
    PatchEmbed,
    PositionalEncoding,
    TcnEmbed,
    TctstModel,
    make_embedding,
)

__all__ = [
    "CheckpointError",
    "MlpEmbed",
    "PatchEmbed",
    "PatchTstModel",
    "PositionalEncoding",
    "TcnEmbed",
    "TctstConfig",
    "TctstModel",
    "load_checkpoint",
    "load_manifest",
    "make_embedding",
    "save_checkpoint",
]
