"""Dense-tensor layers with hand-derived gradients, Adam, and the LR schedule."""
from .gradcheck import check_gradient, numeric_gradient, relative_error
from .modules import (
    Conv1d,
    Dropout,
    FeedForward,
    LayerNorm,
    Linear,
    MaxPool1d,
    Module,
    MultiHeadAttention,
    Parameter,
    ReLU,
    TransformerLayer,
    TransformerStack,
)
from .optim import AdamState, adam_step, lr_factor
from .rng import RngStream
from . import ops

__all__ = [
    "AdamState",
    "Conv1d",
    "Dropout",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "MaxPool1d",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "ReLU",
    "RngStream",
    "TransformerLayer",
    "TransformerStack",
    "adam_step",
    "check_gradient",
    "lr_factor",
    "numeric_gradient",
    "ops",
    "relative_error",
]
