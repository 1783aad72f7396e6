"""Compare the compiled kernel backend against the pure-numpy fallback.

Times the four hot kernels (im2col / col2im / maxpool forward / backward)
on training-shaped inputs and a full autoencoder forward+backward step,
then prints a table with the speedup. Also asserts both backends produce
bit-identical outputs, since determinism across backends is a package
guarantee.

Usage: python3 benchmarks/bench_backends.py [--repeats N] [--batch N]
"""

import argparse
import time

import numpy as np

from prepnet import kernels
from prepnet.losses import loss_rec
from prepnet.models.autoencoder import build_autoencoder
from prepnet.models.config import make_model_config
from prepnet.nn.tensor import Tensor


def time_call(fn, repeats):
    # one warm-up call, then best-of-N wall time
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(batch):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((batch, 16, 32, 32)).astype(np.float32)
    cols = kernels.im2col(np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1))), 3)
    pooled, idx = kernels.maxpool2_forward(x)
    g = rng.standard_normal(pooled.shape).astype(np.float32)
    padded_shape = (batch, 16, 34, 34)
    return {
        "im2col 3x3": lambda: kernels.im2col(
            np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1))), 3),
        "col2im 3x3": lambda: kernels.col2im(cols, padded_shape, 3),
        "maxpool2 fwd": lambda: kernels.maxpool2_forward(x),
        "maxpool2 bwd": lambda: kernels.maxpool2_backward(g, idx, x.shape),
    }


def autoencoder_step(batch):
    config = make_model_config()
    ae = build_autoencoder(config, seed=0)
    rng = np.random.default_rng(1)
    imgs = rng.uniform(0.0, 1.0, (batch, 1, 32, 32)).astype(np.float32)

    def step():
        x = Tensor(imgs)
        loss = loss_rec(imgs, ae.forward(x))
        for _, p in ae.named_params():
            p.grad = None
        loss.backward()
        return loss.data

    return step


def checksum(fn):
    out = fn()
    parts = out if isinstance(out, tuple) else (out,)
    return tuple(np.asarray(p).tobytes() for p in parts)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best-of)")
    parser.add_argument("--batch", type=int, default=32, help="batch size for all cases")
    args = parser.parse_args()

    names = kernels.available_backends()
    if "native" not in names:
        print("compiled extension not built; timing the numpy fallback only")

    cases = dict(kernel_cases(args.batch))
    cases["autoencoder step"] = autoencoder_step(args.batch)

    results = {}
    sums = {}
    for backend in names:
        kernels.set_backend(backend)
        results[backend] = {name: time_call(fn, args.repeats) for name, fn in cases.items()}
        sums[backend] = {name: checksum(fn) for name, fn in cases.items()
                         if name != "autoencoder step"}
    kernels.set_backend(names[-1] if "native" not in names else "native")

    if "native" in names:
        for name in sums["numpy"]:
            assert sums["numpy"][name] == sums["native"][name], f"{name}: backends disagree"
        print("parity: all kernel outputs bit-identical across backends\n")

    width = max(len(n) for n in cases)
    header = f"{'case':<{width}}  " + "".join(f"{b + ' (ms)':>14}" for b in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name in cases:
        row = f"{name:<{width}}  "
        row += "".join(f"{results[b][name] * 1e3:>14.3f}" for b in names)
        if len(names) == 2:
            ratio = results["numpy"][name] / max(results["native"][name], 1e-12)
            row += f"{ratio:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
