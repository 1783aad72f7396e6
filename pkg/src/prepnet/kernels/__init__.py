"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``prepnet.kernels._native``) is preferred when it
imports cleanly; otherwise the numpy fallback is used. Both produce
bit-identical results. Selection happens once at import and can be forced
with the environment variable ``PREPNET_KERNELS`` (``native`` | ``numpy``)
or at runtime via :func:`set_backend` (used by the backend benchmark and
the parity tests).
"""

import os

from . import _fallback

_BACKENDS = {"numpy": _fallback}
try:
    from . import _native

    _BACKENDS["native"] = _native
except ImportError:
    _native = None

_requested = os.environ.get("PREPNET_KERNELS", "auto")
if _requested not in ("auto", "native", "numpy"):
    raise ValueError(f"PREPNET_KERNELS must be 'auto', 'native' or 'numpy', got {_requested!r}")
if _requested == "auto":
    _active = "native" if "native" in _BACKENDS else "numpy"
else:
    if _requested not in _BACKENDS:
        raise ImportError("PREPNET_KERNELS=native requested but the extension is not built")
    _active = _requested
_impl = _BACKENDS[_active]


def backend():
    """Name of the active kernel backend ('native' or 'numpy')."""
    return _active


def available_backends():
    return tuple(sorted(_BACKENDS))


def set_backend(name):
    """Switch the active backend; returns the previous backend name."""
    global _active, _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    prev = _active
    _active, _impl = name, _BACKENDS[name]
    return prev


def im2col(xp, k, stride=1):
    return _impl.im2col(xp, k, stride)


def col2im(cols, shape, k, stride=1):
    return _impl.col2im(cols, tuple(shape), k, stride)


def maxpool2_forward(x):
    return _impl.maxpool2_forward(x)


def maxpool2_backward(g, idx, shape):
    return _impl.maxpool2_backward(g, idx, tuple(shape))
