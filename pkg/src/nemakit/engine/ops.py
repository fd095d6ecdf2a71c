"""Differentiable operators over NCHW tensors.

Only the layer set needed by DenseNet/Inception style classifiers is here:
convolution, batch normalization, ReLU, max/average pooling, global average
pooling, channel concatenation, a dense layer and softmax cross-entropy.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .tensor import Tensor, branch_decision

IntPair = Union[int, tuple[int, int]]


def _pair(value: IntPair) -> tuple[int, int]:
    if isinstance(value, (tuple, list)):
        a, b = value
        return int(a), int(b)
    return int(value), int(value)


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: IntPair = 0,
) -> Tensor:
    """2-D cross-correlation of ``x`` (N, C, H, W) with ``weight`` (O, C, KH, KW).

    ``padding`` may be a pair ``(pad_h, pad_w)`` for asymmetric kernels.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if c != ci:
        raise ValueError(
            f"conv2d channel mismatch: input {x.shape} has {c} channels, weight {weight.shape} expects {ci}"
        )
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    ph, pw = _pair(padding)
    if ph < 0 or pw < 0:
        raise ValueError(f"conv2d padding must be >= 0, got {padding}")
    if bias is not None and bias.shape != (o,):
        raise ValueError(f"conv2d bias shape {bias.shape} does not match weight {weight.shape}")
    ho, wo = _out_size(h, kh, stride, ph), _out_size(w, kw, stride, pw)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d kernel {weight.shape} larger than padded input {x.shape}")

    pointwise = kh == 1 and kw == 1 and stride == 1 and ph == 0 and pw == 0
    if pointwise:
        cols = x.data.reshape(n, c, h * w)
    else:
        cols = kernels.im2col(x.data, kh, kw, stride, ph, pw)
    w2 = weight.data.reshape(o, c * kh * kw)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(n, o, ho, wo)

    def backward(g):
        g3 = g.reshape(n, o, ho * wo)
        gw = np.matmul(g3, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape) if weight.requires_grad else None
        gb = g3.sum(axis=(0, 2)) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g3)
            if pointwise:
                gx = gcols.reshape(x.shape)
            else:
                gx = kernels.col2im(gcols, x.shape, kh, kw, stride, ph, pw)
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d")


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = 0.1,
    epsilon: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization of an NCHW tensor.

    In training mode the batch statistics are used and the running buffers
    are updated in place with an exponential moving average (unbiased
    variance); in eval mode the running buffers are used.
    """
    if x.ndim != 4:
        raise ValueError(f"batch_norm expects NCHW input, got {x.shape}")
    c = x.shape[1]
    for label, t in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)):
        if t.shape != (c,):
            raise ValueError(f"batch_norm {label} shape {t.shape} does not match {c} channels of input {x.shape}")
    if epsilon <= 0:
        raise ValueError("batch_norm epsilon must be positive")

    xd = x.data
    count = xd.shape[0] * xd.shape[2] * xd.shape[3]
    if training:
        mean = xd.mean(axis=(0, 2, 3))
        centered = xd - mean[:, None, None]
        var = np.einsum("nchw,nchw->c", centered, centered) / count
        inv_std = 1.0 / np.sqrt(var + epsilon)
        unbiased = var * (count / max(count - 1, 1))
        running_mean.data[...] = (1 - momentum) * running_mean.data + momentum * mean
        running_var.data[...] = (1 - momentum) * running_var.data + momentum * unbiased
    else:
        mean = running_mean.data
        centered = xd - mean[:, None, None]
        inv_std = 1.0 / np.sqrt(running_var.data + epsilon)
    inv_std = inv_std.astype(xd.dtype)
    xhat = centered * inv_std[:, None, None]
    out = xhat * gamma.data[:, None, None] + beta.data[:, None, None]

    def backward(g):
        gg = np.einsum("nchw,nchw->c", g, xhat) if gamma.requires_grad or training else None
        gb = g.sum(axis=(0, 2, 3))
        gx = None
        if x.requires_grad:
            scale = (gamma.data * inv_std)[:, None, None]
            if training:
                gx = scale * (g - (gb / count)[:, None, None] - xhat * (gg / count)[:, None, None])
            else:
                gx = g * scale
        return (
            gx,
            gg if gamma.requires_grad else None,
            gb if beta.requires_grad else None,
        )

    return Tensor.from_op(out, (x, gamma, beta), backward, "batch_norm")


def relu(x: Tensor) -> Tensor:
    mask = branch_decision(x.data > 0)
    out = x.data * mask

    def backward(g):
        return (g * mask,)

    return Tensor.from_op(out, (x,), backward, "relu")


def pool2d(x: Tensor, kind: str, window: int, stride: Optional[int] = None, padding: int = 0) -> Tensor:
    """Max or average pooling with a square window.

    Max pooling pads with -inf and routes gradient to the first maximum in
    row-major window order. Average pooling counts padded zeros in the
    denominator.
    """
    if x.ndim != 4:
        raise ValueError(f"pool2d expects NCHW input, got {x.shape}")
    stride = window if stride is None else stride
    if window < 1 or stride < 1 or padding < 0:
        raise ValueError(f"invalid pooling window={window} stride={stride} padding={padding}")
    n, c, h, w = x.shape
    if window > h + 2 * padding or window > w + 2 * padding:
        raise ValueError(f"pool window {window} larger than padded input {x.shape} (padding {padding})")
    ho, wo = _out_size(h, window, stride, padding), _out_size(w, window, stride, padding)

    if kind == "max":
        out, index = kernels.maxpool_forward(x.data, window, stride, padding)
        chosen = branch_decision(index)
        if chosen is not index:
            index = chosen
            out = np.take_along_axis(x.data.reshape(n, c, h * w), index.reshape(n, c, -1), axis=2).reshape(out.shape)

        def backward(g):
            return (kernels.maxpool_backward(np.ascontiguousarray(g), index, x.shape),)

        return Tensor.from_op(out, (x,), backward, "max_pool")

    if kind != "average":
        raise ValueError(f"unknown pooling kind {kind!r}")
    area = window * window
    tiled = window == stride and padding == 0 and h % window == 0 and w % window == 0
    if tiled:
        out = x.data.reshape(n, c, ho, window, wo, window).mean(axis=(3, 5))
    else:
        cols = kernels.im2col(x.data.reshape(n * c, 1, h, w), window, window, stride, padding, padding)
        out = cols.mean(axis=1).reshape(n, c, ho, wo)

    def backward(g):
        g = g / area
        if tiled:
            gx = np.broadcast_to(g[:, :, :, None, :, None], (n, c, ho, window, wo, window)).reshape(x.shape)
            return (np.ascontiguousarray(gx),)
        gcols = np.broadcast_to(g.reshape(n * c, 1, ho * wo), (n * c, area, ho * wo))
        gx = kernels.col2im(np.ascontiguousarray(gcols), (n * c, 1, h, w), window, window, stride, padding, padding)
        return (gx.reshape(x.shape),)

    return Tensor.from_op(out, (x,), backward, "avg_pool")


def global_average_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ValueError(f"global_average_pool expects NCHW input, got {x.shape}")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def backward(g):
        return (np.ascontiguousarray(np.broadcast_to((g / (h * w))[:, :, None, None], x.shape)),)

    return Tensor.from_op(out, (x,), backward, "global_average_pool")


def concat(inputs: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate NCHW tensors along the channel axis."""
    if not inputs:
        raise ValueError("concat needs at least one input")
    if len(inputs) == 1:
        return inputs[0]
    ref = inputs[0].shape
    for i, t in enumerate(inputs):
        if t.ndim != len(ref) or any(t.shape[d] != ref[d] for d in range(len(ref)) if d != axis):
            raise ValueError(f"concat input {i} has shape {t.shape}, incompatible with input 0 shape {ref}")
    out = np.concatenate([t.data for t in inputs], axis=axis)
    offsets = np.cumsum([0] + [t.shape[axis] for t in inputs])

    def backward(g):
        return split(g, offsets, axis)

    return Tensor.from_op(out, tuple(inputs), backward, "concat")


def split(g: np.ndarray, offsets: Sequence[int], axis: int = 1) -> list[np.ndarray]:
    """Slice ``g`` along ``axis`` at the cumulative ``offsets`` recorded by :func:`concat`."""
    index = [slice(None)] * g.ndim
    parts = []
    for lo, hi in zip(offsets[:-1], offsets[1:]):
        index[axis] = slice(int(lo), int(hi))
        parts.append(g[tuple(index)])
    return parts


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map ``x @ weight + bias`` with ``weight`` shaped (F, K)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"linear inner-dimension mismatch: input {x.shape}, weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"linear bias shape {bias.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        gx = g @ weight.data.T if x.requires_grad else None
        gw = x.data.T @ g if weight.requires_grad else None
        gb = g.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "linear")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    if logits.ndim != 2:
        raise ValueError(f"softmax_cross_entropy expects (N, K) logits, got {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ValueError(f"{labels.shape[0]} labels for {n} logit rows")
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        raise ValueError(f"label {labels[bad[0]]} at row {bad[0]} outside [0, {k})")
    # log-sum-exp and the batch mean are accumulated in float64
    z = logits.data
    shifted = z.astype(np.float64) - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = np.asarray((log_norm - shifted[rows, labels]).mean(), dtype=z.dtype)

    def backward(g):
        grad = np.exp(shifted - log_norm[:, None])
        grad[rows, labels] -= 1
        return ((grad * (float(np.asarray(g).reshape(-1)[0]) / n)).astype(z.dtype),)

    return Tensor.from_op(loss, (logits,), backward, "softmax_cross_entropy")
