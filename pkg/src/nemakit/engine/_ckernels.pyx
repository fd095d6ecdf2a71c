# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of :mod:`nemakit.engine._pykernels` (same signatures, same layouts)."""

import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


cdef inline Py_ssize_t _out_size(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad) nogil:
    return (size + 2 * pad - k) // stride + 1


def _im2col(floating[:, :, :, ::1] x, floating[:, :, ::1] cols,
            Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t ph, Py_ssize_t pw):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = _out_size(h, kh, stride, ph), wo = _out_size(w, kw, stride, pw)
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row, p
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        p = 0
                        for oy in range(ho):
                            iy = oy * stride + i - ph
                            if iy < 0 or iy >= h:
                                for ox in range(wo):
                                    cols[b, row, p] = 0
                                    p += 1
                                continue
                            for ox in range(wo):
                                ix = ox * stride + j - pw
                                if ix < 0 or ix >= w:
                                    cols[b, row, p] = 0
                                else:
                                    cols[b, row, p] = x[b, ch, iy, ix]
                                p += 1


def im2col(x, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t ph, Py_ssize_t pw):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(w, kw, stride, pw)
    cols = np.empty((n, c * kh * kw, ho * wo), dtype=x.dtype)
    _im2col(x, cols, kh, kw, stride, ph, pw)
    return cols


def _col2im(floating[:, :, ::1] cols, floating[:, :, :, ::1] dx,
            Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t ph, Py_ssize_t pw):
    cdef Py_ssize_t n = dx.shape[0], c = dx.shape[1], h = dx.shape[2], w = dx.shape[3]
    cdef Py_ssize_t ho = _out_size(h, kh, stride, ph), wo = _out_size(w, kw, stride, pw)
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row, p
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for oy in range(ho):
                            iy = oy * stride + i - ph
                            if iy < 0 or iy >= h:
                                continue
                            p = oy * wo
                            for ox in range(wo):
                                ix = ox * stride + j - pw
                                if ix >= 0 and ix < w:
                                    dx[b, ch, iy, ix] += cols[b, row, p + ox]


def col2im(cols, x_shape, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t ph, Py_ssize_t pw):
    cols = np.ascontiguousarray(cols)
    n, c, h, w = x_shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(w, kw, stride, pw)
    cols = cols.reshape(n, c * kh * kw, ho * wo)
    dx = np.zeros((n, c, h, w), dtype=cols.dtype)
    _col2im(cols, dx, kh, kw, stride, ph, pw)
    return dx


def _maxpool_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] out, cnp.int64_t[:, :, :, ::1] index,
                     Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = out.shape[2], wo = out.shape[3]
    cdef Py_ssize_t b, ch, oy, ox, i, j, iy, ix, best_idx
    cdef floating best, v
    cdef bint found
    with nogil:
        for b in range(n):
            for ch in range(c):
                for oy in range(ho):
                    for ox in range(wo):
                        found = False
                        best = 0
                        best_idx = 0
                        for i in range(k):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(k):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= w:
                                    continue
                                v = x[b, ch, iy, ix]
                                if not found or v > best:
                                    best = v
                                    best_idx = iy * w + ix
                                    found = True
                        out[b, ch, oy, ox] = best
                        index[b, ch, oy, ox] = best_idx


def maxpool_forward(x, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    ho = _out_size(h, k, stride, pad)
    wo = _out_size(w, k, stride, pad)
    out = np.empty((n, c, ho, wo), dtype=x.dtype)
    index = np.empty((n, c, ho, wo), dtype=np.int64)
    _maxpool_forward(x, out, index, k, stride, pad)
    return out, index


def _maxpool_backward(floating[:, :, ::1] grad, cnp.int64_t[:, :, ::1] index, floating[:, :, ::1] dx):
    cdef Py_ssize_t m = grad.shape[0], p = grad.shape[1], q = grad.shape[2]
    cdef Py_ssize_t a, b, hw = dx.shape[1] * dx.shape[2], wdim = dx.shape[2]
    cdef cnp.int64_t idx
    with nogil:
        for a in range(m):
            for b in range(p * q):
                idx = index[a, b // q, b % q]
                dx[a, idx // wdim, idx % wdim] += grad[a, b // q, b % q]


def maxpool_backward(grad, index, x_shape):
    n, c, h, w = x_shape
    grad = np.ascontiguousarray(grad)
    g3 = grad.reshape(n * c, grad.shape[2], grad.shape[3])
    i3 = np.ascontiguousarray(index).reshape(n * c, grad.shape[2], grad.shape[3])
    dx = np.zeros((n * c, h, w), dtype=grad.dtype)
    _maxpool_backward(g3, i3, dx)
    return dx.reshape(n, c, h, w)
