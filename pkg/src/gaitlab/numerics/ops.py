"""Dense-tensor layer kernels: forward passes paired with hand-derived backwards.

Conventions
-----------
* Arrays are row-major numpy ndarrays, float32 for training and float64
  for gradient checking. Every kernel preserves the input dtype.
* ``*_forward`` returns ``(y, ctx)``; the matching ``*_backward`` takes
  the upstream gradient and ``ctx`` and returns input/parameter grads.
* Convolution uses the cross-correlation convention (no kernel flip) with
  explicit zero padding.
* All outputs are checked finite by callers via :func:`ensure_finite`.
"""
from __future__ import annotations

import numpy as np

from .rng import RngStream


def ensure_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x


# ---------------------------------------------------------------------------
# elementwise / dense
# ---------------------------------------------------------------------------

def relu_forward(x, inplace: bool = False):
    """Elementwise max(0, x); the cached output doubles as the gradient
    mask (y > 0 iff x > 0). ``inplace`` overwrites x, which is safe only
    for dead temporaries."""
    y = np.maximum(x, x.dtype.type(0), out=x if inplace else None)
    return y, y


def relu_backward(gy, y):
    return np.where(y > 0, gy, gy.dtype.type(0))


def linear_forward(x, w, b=None):
    """y = x @ w.T (+ b) over the trailing dimension.

    x: [..., in], w: [out, in], b: [out] or None -> y: [..., out]
    """
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"linear: input dim {x.shape[-1]} != weight dim {w.shape[1]}")
    y = x @ w.T
    if b is not None:
        y = y + b
    return y, (x, w)


def linear_backward(gy, ctx, with_bias=True):
    x, w = ctx
    gx = gy @ w
    g2 = gy.reshape(-1, gy.shape[-1])
    x2 = x.reshape(-1, x.shape[-1])
    gw = g2.T @ x2
    gb = g2.sum(axis=0) if with_bias else None
    return gx, gw, gb


def mse_forward(pred, target):
    """Mean of squared differences over all elements."""
    if pred.shape != target.shape:
        raise ValueError(f"mse: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), diff


def mse_backward(diff):
    return (2.0 / diff.size) * diff


# ---------------------------------------------------------------------------
# temporal ops
# ---------------------------------------------------------------------------

def _as_batched(x):
    """Promote [C, L] to [1, C, L]; report whether promotion happened."""
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError(f"expected 2D or 3D input, got shape {x.shape}")


def conv1d_cl_forward(x, kernels, bias, padding: int = 0, stride: int = 1):
    """Cross-correlation in channels-last layout: [B, L, C_in] -> [B, L_out, C_out].

    kernels stay [C_out, C_in, k]. Channels-last keeps the im2col gather
    and the GEMM output contiguous, which is what makes batched training
    fast; the channels-first wrappers below transpose around this core.
    """
    if stride < 1:
        raise ValueError(f"conv1d: stride must be >= 1, got {stride}")
    b_sz, length, c_in = x.shape
    c_out, c_in_k, k = kernels.shape
    if c_in != c_in_k:
        raise ValueError(f"conv1d: {c_in} input channels vs kernels expecting {c_in_k}")
    if length + 2 * padding < k:
        raise ValueError("conv1d: input shorter than kernel after padding")
    xp = np.pad(x, ((0, 0), (padding, padding), (0, 0))) if padding else x
    l_out = (length + 2 * padding - k) // stride + 1
    span = stride * (l_out - 1) + 1

    cols = np.empty((b_sz, l_out, k, c_in), dtype=x.dtype)
    for j in range(k):
        cols[:, :, j, :] = xp[:, j : j + span : stride, :]
    cols2 = cols.reshape(b_sz * l_out, k * c_in)
    w2 = np.ascontiguousarray(kernels.transpose(0, 2, 1)).reshape(c_out, k * c_in)
    y2 = cols2 @ w2.T
    if bias is not None:
        y2 += bias
    ctx = (cols2, kernels, padding, stride, l_out, x.shape)
    return y2.reshape(b_sz, l_out, c_out), ctx


def conv1d_cl_backward(gy, ctx):
    cols2, kernels, padding, stride, l_out, x_shape = ctx
    b_sz, length, c_in = x_shape
    c_out, _, k = kernels.shape
    span = stride * (l_out - 1) + 1
    g2 = gy.reshape(b_sz * l_out, c_out)

    gw = (g2.T @ cols2).reshape(c_out, k, c_in).transpose(0, 2, 1)
    gb = g2.sum(axis=0)
    w2 = np.ascontiguousarray(kernels.transpose(0, 2, 1)).reshape(c_out, k * c_in)
    gcols = (g2 @ w2).reshape(b_sz, l_out, k, c_in)
    gxp = np.zeros((b_sz, length + 2 * padding, c_in), dtype=gy.dtype)
    for j in range(k):
        gxp[:, j : j + span : stride, :] += gcols[:, :, j, :]
    gx = gxp[:, padding : padding + length, :] if padding else gxp
    return gx, np.ascontiguousarray(gw), gb


def conv1d_forward(x, kernels, bias, padding: int = 0, stride: int = 1):
    """Cross-correlation along the last axis.

    x: [B, C_in, L] (or [C_in, L]), kernels: [C_out, C_in, k], bias: [C_out].
    L_out = floor((L + 2*padding - k) / stride) + 1.
    """
    x3, squeezed = _as_batched(x)
    y_cl, ctx = conv1d_cl_forward(np.ascontiguousarray(x3.transpose(0, 2, 1)),
                                  kernels, bias, padding, stride)
    y = np.ascontiguousarray(y_cl.transpose(0, 2, 1))
    return (y[0] if squeezed else y), (ctx, squeezed)


def conv1d_backward(gy, ctx):
    ctx, squeezed = ctx
    if squeezed:
        gy = gy[None]
    gx_cl, gw, gb = conv1d_cl_backward(np.ascontiguousarray(gy.transpose(0, 2, 1)), ctx)
    gx = np.ascontiguousarray(gx_cl.transpose(0, 2, 1))
    return (gx[0] if squeezed else gx), gw, gb


def maxpool1d_cl_forward(x, size: int, stride: int):
    """Windowed maximum over the middle axis of [B, L, C].

    Argmax is deferred to the backward pass, so inference pays only for
    the max; non-overlapping pooling (stride == size) reads a reshaped
    view with no gather.
    """
    b_sz, length, c = x.shape
    if length < size:
        raise ValueError(f"maxpool1d: input length {length} < pool size {size}")
    l_out = (length - size) // stride + 1
    if stride == size:
        windows = x[:, : l_out * size, :].reshape(b_sz, l_out, size, c)
    else:
        idx = (np.arange(l_out) * stride)[:, None] + np.arange(size)[None, :]
        windows = x[:, idx, :]                           # [B, L_out, size, C]
    y = windows[:, :, 0, :].copy()
    for j in range(1, size):
        np.maximum(y, windows[:, :, j, :], out=y)
    return y, (windows, size, stride, x.shape)


def maxpool1d_cl_backward(gy, ctx):
    windows, size, stride, x_shape, = ctx
    b_sz, length, c = x_shape
    arg = windows.argmax(axis=2)                         # [B, L_out, C], first max wins
    l_out = arg.shape[1]
    gx = np.zeros((b_sz, length, c), dtype=gy.dtype)
    if stride == size:
        gxw = gx[:, : l_out * size, :].reshape(b_sz, l_out, size, c)
        np.put_along_axis(gxw, arg[:, :, None, :], gy[:, :, None, :], axis=2)
    else:
        b_idx = np.arange(b_sz)[:, None, None]
        pos = (np.arange(l_out) * stride)[None, :, None] + arg
        c_idx = np.arange(c)[None, None, :]
        np.add.at(gx, (b_idx, pos, c_idx), gy)
    return gx


def maxpool1d_forward(x, size: int, stride: int):
    """Windowed maximum on [B, C, L] (or [C, L]); ties route the gradient
    to the first occurrence."""
    x3, squeezed = _as_batched(x)
    y_cl, ctx = maxpool1d_cl_forward(np.ascontiguousarray(x3.transpose(0, 2, 1)), size, stride)
    y = np.ascontiguousarray(y_cl.transpose(0, 2, 1))
    return (y[0] if squeezed else y), (ctx, squeezed)


def maxpool1d_backward(gy, ctx):
    ctx, squeezed = ctx
    if squeezed:
        gy = gy[None]
    gx_cl = maxpool1d_cl_backward(np.ascontiguousarray(gy.transpose(0, 2, 1)), ctx)
    gx = np.ascontiguousarray(gx_cl.transpose(0, 2, 1))
    return gx[0] if squeezed else gx


# ---------------------------------------------------------------------------
# normalization / attention
# ---------------------------------------------------------------------------

def layer_norm_forward(x, gamma, beta, eps: float = 1e-5):
    """Normalize the trailing dim to zero mean / unit variance, then affine."""
    mu = x.mean(axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv, gamma)


def layer_norm_backward(gy, ctx):
    xhat, inv, gamma = ctx
    gxhat = gy * gamma
    m1 = gxhat.mean(axis=-1, keepdims=True)
    m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
    gx = inv * (gxhat - m1 - xhat * m2)
    axes = tuple(range(gy.ndim - 1))
    return gx, (gy * xhat).sum(axis=axes), gy.sum(axis=axes)


def softmax(x):
    """Max-subtracted exponential normalization over the trailing dim."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(gy, y):
    return y * (gy - (gy * y).sum(axis=-1, keepdims=True))


def attention_forward(q, k, v):
    """Scaled dot-product attention on [..., T, head_dim] stacks."""
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = (q @ np.swapaxes(k, -1, -2)) * q.dtype.type(scale)
    probs = softmax(scores)
    out = probs @ v
    return out, (q, k, v, probs, scale)


def attention_backward(gy, ctx):
    q, k, v, probs, scale = ctx
    gp = gy @ np.swapaxes(v, -1, -2)
    gv = np.swapaxes(probs, -1, -2) @ gy
    gs = softmax_backward(gp, probs)
    gq = (gs @ k) * q.dtype.type(scale)
    gk = (np.swapaxes(gs, -1, -2) @ q) * q.dtype.type(scale)
    return gq, gk, gv


# ---------------------------------------------------------------------------
# regularization
# ---------------------------------------------------------------------------

def dropout_forward(x, p: float, rng: RngStream, training: bool):
    """Zero with probability p and rescale survivors by 1/(1-p) in training."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x, None
    keep = rng.keep_mask(p, x.shape)
    scale = x.dtype.type(1.0 / (1.0 - p))
    return np.where(keep, x * scale, x.dtype.type(0)), (keep, scale)


def dropout_backward(gy, ctx):
    if ctx is None:
        return gy
    keep, scale = ctx
    return np.where(keep, gy * scale, gy.dtype.type(0))
