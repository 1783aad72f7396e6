"""Parameterized layers and the parameter-naming convention.

Parameters are plain Tensors with ``requires_grad=True``; components
expose ``named_params()`` returning ``(dotted.name, Tensor)`` pairs in a
fixed order. That ordering is load-bearing: initialization draws from the
seeded RNG in declaration order, and checkpoints/stage-isolation checks
key off the names.
"""

import numpy as np

from . import ops
from .tensor import Tensor


class Conv2d:
    """k x k convolution, stride 1, 'same' padding by default."""

    def __init__(self, c_in, c_out, rng, k=3, stride=1, pad=None, dtype=np.float32):
        self.stride = stride
        self.pad = k // 2 if pad is None else pad
        std = np.sqrt(2.0 / (c_in * k * k))
        self.w = Tensor((rng.standard_normal((c_out, c_in, k, k)) * std).astype(dtype), requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return ops.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)

    def named_params(self):
        return [("w", self.w), ("b", self.b)]


class Linear:
    def __init__(self, d_in, d_out, rng, dtype=np.float32):
        std = np.sqrt(2.0 / d_in)
        self.w = Tensor((rng.standard_normal((d_in, d_out)) * std).astype(dtype), requires_grad=True)
        self.b = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return ops.linear(x, self.w, self.b)

    def named_params(self):
        return [("w", self.w), ("b", self.b)]

    def zero_(self):
        """Zero the parameters in place (used in tests for known outputs)."""
        self.w.data[...] = 0
        self.b.data[...] = 0


def prefix_params(prefix, items):
    return [(f"{prefix}.{name}", t) for name, t in items]


def set_requires_grad(named, flag):
    for _, t in named:
        t.requires_grad = flag


def zero_grads(named):
    for _, t in named:
        t.grad = None


def param_bytes_hash(named):
    """Stable content hash of parameters, name by name."""
    import hashlib

    h = hashlib.sha256()
    for name, t in named:
        h.update(name.encode())
        h.update(np.ascontiguousarray(t.data).tobytes())
    return h.hexdigest()
