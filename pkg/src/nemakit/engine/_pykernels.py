"""Pure numpy implementations of the hot convolution/pooling kernels.

Column layout shared with the compiled kernels::

    cols[n, (c, i, j), (ho, wo)] = xpad[n, c, ho * stride + i, wo * stride + j]
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, kh, kw, stride, ph, pw):
    n, c, h, w = x.shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(w, kw, stride, pw)
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    # (n, c, ho, wo, kh, kw) -> (n, c, kh, kw, ho, wo)
    cols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    return cols.reshape(n, c * kh * kw, ho * wo)


def col2im(cols, x_shape, kh, kw, stride, ph, pw):
    n, c, h, w = x_shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(w, kw, stride, pw)
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    dx = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, :, i, j]
    if ph or pw:
        dx = dx[:, :, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(dx)


def maxpool_forward(x, k, stride, pad):
    """Return pooled values and, per output, the flat ``h * W + w`` input index of the max.

    Ties resolve to the first element in row-major window order.
    """
    n, c, h, w = x.shape
    ho = _out_size(h, k, stride, pad)
    wo = _out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    win = win.reshape(n, c, ho, wo, k * k)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    rows = np.arange(ho)[:, None] * stride + arg // k - pad
    cols = np.arange(wo)[None, :] * stride + arg % k - pad
    index = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(out), index


def maxpool_backward(grad, index, x_shape):
    n, c, h, w = x_shape
    base = (np.arange(n * c, dtype=np.int64) * (h * w)).reshape(n, c, 1, 1)
    flat = np.bincount((index + base).ravel(), weights=grad.ravel(), minlength=n * c * h * w)
    return flat.astype(grad.dtype).reshape(x_shape)
