"""Layer objects: parameters plus cached-context forward/backward.

A :class:`Module` owns named :class:`Parameter` s and children. Forward
caches whatever backward needs; exactly one forward/backward pair may be
in flight per module instance (the training loops respect this). Names
are dotted paths fixed at construction ("encoder.layer0.attn.wq.weight"),
which is what checkpointing and weight transfer key on.

Weight init is uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for dense and
conv kernels and their biases; layer-norm starts at gamma=1, beta=0. All
draws come from the RngStream handed to the constructor, so a model is a
pure function of (config, seed).
"""
from __future__ import annotations

import numpy as np

from . import ops
from .rng import RngStream


class Parameter:
    """A value tensor paired with its gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Module:
    def __init__(self, prefix: str = ""):
        self.prefix = prefix
        self._params: list[Parameter] = []
        self._children: list[Module] = []
        self._ctx = None

    def _register(self, name: str, value: np.ndarray) -> Parameter:
        full = f"{self.prefix}.{name}" if self.prefix else name
        p = Parameter(full, value)
        self._params.append(p)
        return p

    def _child(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def parameters(self) -> list[Parameter]:
        out = list(self._params)
        for c in self._children:
            out.extend(c.parameters())
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0

    def n_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def forward(self, x, training: bool = False):  # pragma: no cover - interface
        raise NotImplementedError

    def backward(self, gy):  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, x, training: bool = False):
        return self.forward(x, training)


def _uniform_init(rng: RngStream, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape, dtype=dtype)


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, prefix, dtype=np.float32, bias=True):
        super().__init__(prefix)
        self.w = self._register("weight", _uniform_init(rng, (out_dim, in_dim), in_dim, dtype))
        self.b = self._register("bias", _uniform_init(rng, (out_dim,), in_dim, dtype)) if bias else None

    def forward(self, x, training=False):
        y, self._ctx = ops.linear_forward(x, self.w.value, None if self.b is None else self.b.value)
        return y

    def backward(self, gy):
        gx, gw, gb = ops.linear_backward(gy, self._ctx, with_bias=self.b is not None)
        self.w.grad += gw
        if self.b is not None:
            self.b.grad += gb
        return gx


class Conv1d(Module):
    """1-D cross-correlation; channels_last works on [B, L, C] tensors,
    which is the fast layout the TCN embedding runs in."""

    def __init__(self, c_in, c_out, kernel, rng, prefix, padding=0, stride=1,
                 dtype=np.float32, channels_last=False):
        super().__init__(prefix)
        fan_in = c_in * kernel
        self.w = self._register("weight", _uniform_init(rng, (c_out, c_in, kernel), fan_in, dtype))
        self.b = self._register("bias", _uniform_init(rng, (c_out,), fan_in, dtype))
        self.padding = padding
        self.stride = stride
        self.channels_last = channels_last

    def forward(self, x, training=False):
        fwd = ops.conv1d_cl_forward if self.channels_last else ops.conv1d_forward
        y, self._ctx = fwd(x, self.w.value, self.b.value, self.padding, self.stride)
        return y

    def backward(self, gy):
        bwd = ops.conv1d_cl_backward if self.channels_last else ops.conv1d_backward
        gx, gw, gb = bwd(gy, self._ctx)
        self.w.grad += gw
        self.b.grad += gb
        return gx


class ReLU(Module):
    """In-place by default: every use site feeds it a dead temporary."""

    def __init__(self, inplace: bool = True):
        super().__init__()
        self.inplace = inplace

    def forward(self, x, training=False):
        y, self._ctx = ops.relu_forward(x, inplace=self.inplace)
        return y

    def backward(self, gy):
        return ops.relu_backward(gy, self._ctx)


class MaxPool1d(Module):
    def __init__(self, size, stride=None, channels_last=False):
        super().__init__()
        self.size = size
        self.stride = size if stride is None else stride
        self.channels_last = channels_last

    def forward(self, x, training=False):
        fwd = ops.maxpool1d_cl_forward if self.channels_last else ops.maxpool1d_forward
        y, self._ctx = fwd(x, self.size, self.stride)
        return y

    def backward(self, gy):
        bwd = ops.maxpool1d_cl_backward if self.channels_last else ops.maxpool1d_backward
        return bwd(gy, self._ctx)


class LayerNorm(Module):
    def __init__(self, dim, rng, prefix, dtype=np.float32, eps=1e-5):
        super().__init__(prefix)
        self.gamma = self._register("gamma", np.ones(dim, dtype=dtype))
        self.beta = self._register("beta", np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x, training=False):
        y, self._ctx = ops.layer_norm_forward(x, self.gamma.value, self.beta.value, self.eps)
        return y

    def backward(self, gy):
        gx, gg, gb = ops.layer_norm_backward(gy, self._ctx)
        self.gamma.grad += gg
        self.beta.grad += gb
        return gx


class Dropout(Module):
    """Inverted dropout; the rng stream is owned by the enclosing model."""

    def __init__(self, p, rng: RngStream):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng

    def forward(self, x, training=False):
        y, self._ctx = ops.dropout_forward(x, self.p, self.rng, training)
        return y

    def backward(self, gy):
        return ops.dropout_backward(gy, self._ctx)


class MultiHeadAttention(Module):
    """Standard scaled dot-product attention over a token axis, no mask."""

    def __init__(self, dim, n_head, rng, prefix, dtype=np.float32, qkv_bias=True):
        super().__init__(prefix)
        if dim % n_head != 0:
            raise ValueError(f"model dim {dim} not divisible by {n_head} heads")
        self.dim = dim
        self.n_head = n_head
        self.head_dim = dim // n_head
        self.wq = self._child(Linear(dim, dim, rng, f"{prefix}.wq", dtype, bias=qkv_bias))
        self.wk = self._child(Linear(dim, dim, rng, f"{prefix}.wk", dtype, bias=qkv_bias))
        self.wv = self._child(Linear(dim, dim, rng, f"{prefix}.wv", dtype, bias=qkv_bias))
        self.wo = self._child(Linear(dim, dim, rng, f"{prefix}.wo", dtype, bias=True))

    def _split(self, x):
        b, t, _ = x.shape
        return x.reshape(b, t, self.n_head, self.head_dim).transpose(0, 2, 1, 3)

    def _merge(self, x):
        b, h, t, hd = x.shape
        return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, t, h * hd)

    def forward(self, x, training=False):
        q = self._split(self.wq(x, training))
        k = self._split(self.wk(x, training))
        v = self._split(self.wv(x, training))
        out, self._ctx = ops.attention_forward(q, k, v)
        return self.wo(self._merge(out), training)

    def backward(self, gy):
        g_merged = self.wo.backward(gy)
        gq, gk, gv = ops.attention_backward(self._split(g_merged), self._ctx)
        gx = self.wq.backward(self._merge(gq))
        gx = gx + self.wk.backward(self._merge(gk))
        gx = gx + self.wv.backward(self._merge(gv))
        return gx


class FeedForward(Module):
    """linear -> ReLU -> linear expansion block."""

    def __init__(self, dim, hidden, rng, prefix, dtype=np.float32):
        super().__init__(prefix)
        self.fc1 = self._child(Linear(dim, hidden, rng, f"{prefix}.fc1", dtype))
        self.act = self._child(ReLU())
        self.fc2 = self._child(Linear(hidden, dim, rng, f"{prefix}.fc2", dtype))

    def forward(self, x, training=False):
        return self.fc2(self.act(self.fc1(x, training), training), training)

    def backward(self, gy):
        return self.fc1.backward(self.act.backward(self.fc2.backward(gy)))


class TransformerLayer(Module):
    """Pre-norm block: x += MHA(LN(x)); x += FFN(LN(x))."""

    def __init__(self, dim, n_head, mlp_ratio, rng, prefix, dtype=np.float32, qkv_bias=True):
        super().__init__(prefix)
        hidden = int(round(dim * mlp_ratio))
        self.ln1 = self._child(LayerNorm(dim, rng, f"{prefix}.ln1", dtype))
        self.attn = self._child(MultiHeadAttention(dim, n_head, rng, f"{prefix}.attn", dtype, qkv_bias))
        self.ln2 = self._child(LayerNorm(dim, rng, f"{prefix}.ln2", dtype))
        self.ffn = self._child(FeedForward(dim, hidden, rng, f"{prefix}.ffn", dtype))

    def forward(self, x, training=False):
        x = x + self.attn(self.ln1(x, training), training)
        return x + self.ffn(self.ln2(x, training), training)

    def backward(self, gy):
        gy = gy + self.ln2.backward(self.ffn.backward(gy))
        return gy + self.ln1.backward(self.attn.backward(gy))


class TransformerStack(Module):
    def __init__(self, n_layers, dim, n_head, mlp_ratio, rng, prefix, dtype=np.float32, qkv_bias=True):
        super().__init__(prefix)
        self.layers = [
            self._child(
                TransformerLayer(dim, n_head, mlp_ratio, rng, f"{prefix}.layer{i}", dtype, qkv_bias)
            )
            for i in range(n_layers)
        ]

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer(x, training)
        return x

    def backward(self, gy):
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy
