"""Differentiable operations used by the network components.

Every op returns a new :class:`Tensor` wired into the tape. Backward
closures only accumulate into parents with ``requires_grad`` set, so
freezing a component (e.g. the dataset classifier during generator
updates) is just flipping that flag on its parameters.
"""

import numpy as np

from .. import kernels
from .tensor import Tensor, make_op


def conv2d(x, w, b, stride=1, pad=1):
    """3x3-style convolution via im2col + GEMM.

    x: (N, C, H, W); w: (F, C, k, k); b: (F,).
    """
    n, c, h, wd = x.data.shape
    f, cw, k, _ = w.data.shape
    if cw != c:
        raise ValueError(f"conv2d channel mismatch: input {c}, weight {cw}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    cols = kernels.im2col(np.ascontiguousarray(xp), k, stride)  # (N, C*k*k, OH*OW)
    w2 = w.data.reshape(f, c * k * k)
    out = np.matmul(w2, cols) + b.data[None, :, None]  # (N, F, OH*OW)
    out = out.reshape(n, f, oh, ow)

    def backward(g):
        g2 = g.reshape(n, f, oh * ow)
        if b.requires_grad:
            b.accumulate_grad(g2.sum(axis=(0, 2)))
        if w.requires_grad:
            dw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            w.accumulate_grad(dw.reshape(f, c, k, k))
        if x.requires_grad:
            dcols = np.matmul(w2.T, g2)  # (N, C*k*k, OH*OW)
            dxp = kernels.col2im(np.ascontiguousarray(dcols), xp.shape, k, stride)
            dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
            x.accumulate_grad(np.ascontiguousarray(dx))

    return make_op(out, (x, w, b), backward)


def linear(x, w, b):
    """x: (N, D) @ w: (D, M) + b: (M,)."""
    out = x.data @ w.data + b.data

    def backward(g):
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))
        if w.requires_grad:
            w.accumulate_grad(x.data.T @ g)
        if x.requires_grad:
            x.accumulate_grad(g @ w.data.T)

    return make_op(out, (x, w, b), backward)


def relu(x):
    mask = x.data > 0
    out = np.where(mask, x.data, x.data.dtype.type(0))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.where(mask, g, g.dtype.type(0)))

    return make_op(out, (x,), backward)


def sigmoid(x):
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * out * (1.0 - out))

    return make_op(out, (x,), backward)


def maxpool2(x):
    out, idx = kernels.maxpool2_forward(np.ascontiguousarray(x.data))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(kernels.maxpool2_backward(np.ascontiguousarray(g), idx, x.data.shape))

    return make_op(out, (x,), backward)


def upsample2(x):
    """Nearest-neighbour 2x spatial upsampling."""
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        if x.requires_grad:
            n, c, h, w = x.data.shape
            g6 = g.reshape(n, c, h, 2, w, 2)
            # fixed (dy, dx) summation order keeps the accumulation deterministic
            dx = g6[:, :, :, 0, :, 0] + g6[:, :, :, 0, :, 1] + g6[:, :, :, 1, :, 0] + g6[:, :, :, 1, :, 1]
            x.accumulate_grad(dx)

    return make_op(out, (x,), backward)


def concat_channels(a, b):
    ca = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.ascontiguousarray(g[:, :ca]))
        if b.requires_grad:
            b.accumulate_grad(np.ascontiguousarray(g[:, ca:]))

    return make_op(out, (a, b), backward)


def add(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return make_op(out, (a, b), backward)


def affine_const(x, scale, shift):
    """Elementwise x * scale + shift with non-trainable scalars."""
    out = x.data * scale + shift

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * scale)

    return make_op(out, (x,), backward)


def global_avg_pool(x):
    """(N, C, H, W) -> (N, C) spatial mean."""
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to((g / (h * w))[:, :, None, None], x.data.shape).copy())

    return make_op(out, (x,), backward)


def reshape(x, shape):
    out = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.data.shape))

    return make_op(out, (x,), backward)


def scale(x, alpha):
    out = x.data * alpha

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * alpha)

    return make_op(out, (x,), backward)


def add_scalars(terms):
    """Sum scalar tensors left to right (fixed order, bitwise reproducible)."""
    acc = terms[0]
    for t in terms[1:]:
        acc = add(acc, t)
    return acc
