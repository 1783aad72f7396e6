"""Pure-numpy implementations of the hot convolution/pooling kernels.

These mirror the compiled extension exactly, including floating-point
accumulation order, so switching backends never changes results:

* im2col/maxpool are pure data movement,
* col2im accumulates contributions in (ky, kx)-lexicographic order per
  output element, matching the loop order in the compiled kernel.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, k, stride):
    """Unfold padded input (N,C,Hp,Wp) into columns (N, C*k*k, OH*OW)."""
    n, c, hp, wp = xp.shape
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, oh * ow)
    return np.ascontiguousarray(cols)


def col2im(cols, shape, k, stride):
    """Fold columns back onto the padded input shape, accumulating overlaps."""
    n, c, hp, wp = shape
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    cols6 = cols.reshape(n, c, k, k, oh, ow)
    out = np.zeros(shape, dtype=cols.dtype)
    for ky in range(k):
        for kx in range(k):
            out[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride] += cols6[
                :, :, ky, kx
            ]
    return out


def maxpool2_forward(x):
    """2x2/stride-2 max pool; returns (out, argmax in window, uint8 0..3).

    Ties resolve to the first maximum in (dy, dx) row-major window order.
    """
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    v = x.reshape(n, c, oh, 2, ow, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, 4)
    idx = v.argmax(axis=4).astype(np.uint8)
    out = np.take_along_axis(v, idx[..., None], axis=4)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(g, idx, shape):
    """Scatter pooled gradients back to the positions recorded by forward."""
    n, c, h, w = shape
    oh, ow = h // 2, w // 2
    g4 = np.zeros((n, c, oh, ow, 4), dtype=g.dtype)
    np.put_along_axis(g4, idx[..., None], g[..., None], axis=4)
    return np.ascontiguousarray(
        g4.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
    )
