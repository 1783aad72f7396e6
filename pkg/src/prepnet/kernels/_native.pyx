# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the convolution/pooling hot paths.

Loop orders are chosen so that floating-point accumulation matches the
numpy fallback bit for bit (col2im sums contributions per output element
in (ky, kx)-lexicographic order; maxpool breaks ties on the first window
maximum in row-major order).
"""

import numpy as np

cimport cython
cimport numpy as cnp

ctypedef fused floating:
    float
    double


@cython.boundscheck(False)
@cython.wraparound(False)
def im2col(floating[:, :, :, ::1] xp, int k, int stride):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1], hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t oh = (hp - k) // stride + 1
    cdef Py_ssize_t ow = (wp - k) // stride + 1
    if floating is float:
        out_np = np.empty((n, c * k * k, oh * ow), dtype=np.float32)
    else:
        out_np = np.empty((n, c * k * k, oh * ow), dtype=np.float64)
    cdef floating[:, :, ::1] out = out_np
    cdef Py_ssize_t i, j, ky, kx, y, x, row
    with nogil:
        for i in range(n):
            for j in range(c):
                for ky in range(k):
                    for kx in range(k):
                        row = (j * k + ky) * k + kx
                        for y in range(oh):
                            for x in range(ow):
                                out[i, row, y * ow + x] = xp[i, j, y * stride + ky, x * stride + kx]
    return out_np


@cython.boundscheck(False)
@cython.wraparound(False)
def col2im(floating[:, :, ::1] cols, shape, int k, int stride):
    cdef Py_ssize_t n = shape[0], c = shape[1], hp = shape[2], wp = shape[3]
    cdef Py_ssize_t oh = (hp - k) // stride + 1
    cdef Py_ssize_t ow = (wp - k) // stride + 1
    if floating is float:
        out_np = np.zeros((n, c, hp, wp), dtype=np.float32)
    else:
        out_np = np.zeros((n, c, hp, wp), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t i, j, ky, kx, y, x, row
    with nogil:
        for i in range(n):
            for j in range(c):
                for ky in range(k):
                    for kx in range(k):
                        row = (j * k + ky) * k + kx
                        for y in range(oh):
                            for x in range(ow):
                                out[i, j, y * stride + ky, x * stride + kx] += cols[i, row, y * ow + x]
    return out_np


@cython.boundscheck(False)
@cython.wraparound(False)
def maxpool2_forward(floating[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    if floating is float:
        out_np = np.empty((n, c, oh, ow), dtype=np.float32)
    else:
        out_np = np.empty((n, c, oh, ow), dtype=np.float64)
    idx_np = np.empty((n, c, oh, ow), dtype=np.uint8)
    cdef floating[:, :, :, ::1] out = out_np
    cdef unsigned char[:, :, :, ::1] idx = idx_np
    cdef Py_ssize_t i, j, y, x_, dy, dx
    cdef floating best, v
    cdef unsigned char bj
    with nogil:
        for i in range(n):
            for j in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        best = x[i, j, 2 * y, 2 * x_]
                        bj = 0
                        for dy in range(2):
                            for dx in range(2):
                                v = x[i, j, 2 * y + dy, 2 * x_ + dx]
                                if v > best:
                                    best = v
                                    bj = <unsigned char> (dy * 2 + dx)
                        out[i, j, y, x_] = best
                        idx[i, j, y, x_] = bj
    return out_np, idx_np


@cython.boundscheck(False)
@cython.wraparound(False)
def maxpool2_backward(floating[:, :, :, ::1] g, unsigned char[:, :, :, ::1] idx, shape):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    if floating is float:
        out_np = np.zeros((n, c, h, w), dtype=np.float32)
    else:
        out_np = np.zeros((n, c, h, w), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t i, j, y, x_
    cdef unsigned char bj
    with nogil:
        for i in range(n):
            for j in range(c):
                for y in range(oh):
                    for x_ in range(ow):
                        bj = idx[i, j, y, x_]
                        out[i, j, 2 * y + (bj >> 1), 2 * x_ + (bj & 1)] = g[i, j, y, x_]
    return out_np
