#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends (numba @njit vs pure numpy).

The patch gather/scatter kernels sit under every convolution, transposed
convolution and attention transfer, so their throughput dominates
non-GEMM time. Run:

    python3 benchmarks/bench_kernels.py
    PENNET_BACKEND=numpy pennet smoke ...   # force the fallback end to end
"""

import time

import numpy as np

from pennet.kernels import numba_impl, numpy_impl
from pennet.model import PenNet, PenNetConfig
from pennet import set_backend
from pennet.data import make_center_mask
from pennet.types import BinaryMask, ImageSample

CASES = [
    # name, (n, c, h, w), k, stride, dilation, pad
    ("encoder 3x3 s1 @256", (1, 16, 256, 256), 3, 1, 1, 1),
    ("encoder 3x3 s2 @128", (4, 32, 128, 128), 3, 2, 1, 1),
    ("transfer 4x4 s2 @128", (4, 32, 128, 128), 4, 2, 1, 1),
    ("disc 5x5 s2 @128", (4, 64, 128, 128), 5, 2, 1, 2),
    ("refine 3x3 d8 @64", (4, 64, 64, 64), 3, 1, 8, 8),
]


def bench(fn, *args, repeats=5):
    fn(*args)  # warmup (JIT compile on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    rng = np.random.default_rng(0)
    print(f"{'case':<24} {'numpy im2col':>13} {'numba im2col':>13} "
          f"{'numpy col2im':>13} {'numba col2im':>13} {'speedup':>8}")
    for name, shape, k, stride, dilation, pad in CASES:
        x = rng.normal(size=shape).astype(np.float32)
        t_np = bench(numpy_impl.im2col, x, k, stride, dilation, pad)
        t_nb = bench(numba_impl.im2col, x, k, stride, dilation, pad)
        cols = numpy_impl.im2col(x, k, stride, dilation, pad)
        args = (cols, *shape, k, stride, dilation, pad)
        t_np2 = bench(numpy_impl.col2im, *args)
        t_nb2 = bench(numba_impl.col2im, *args)
        speed = (t_np + t_np2) / (t_nb + t_nb2)
        print(f"{name:<24} {t_np * 1e3:>11.2f}ms {t_nb * 1e3:>11.2f}ms "
              f"{t_np2 * 1e3:>11.2f}ms {t_nb2 * 1e3:>11.2f}ms {speed:>7.2f}x")

    print("\nend-to-end generator forward (mini config, 128px, center mask):")
    image = ImageSample(rng.uniform(-1, 1, size=(128, 128, 3)))
    mask = BinaryMask(make_center_mask(64, 128).values)
    for backend in ("numpy", "numba"):
        set_backend(backend)
        model = PenNet(PenNetConfig.mini(resolution=128, seed=0))
        model.generator.generator_forward(image, mask)  # warmup
        t0 = time.perf_counter()
        for _ in range(3):
            model.generator.generator_forward(image, mask)
        dt = (time.perf_counter() - t0) / 3
        print(f"  {backend:<6} {dt * 1e3:8.1f} ms/forward")
    set_backend("numba")


if __name__ == "__main__":
    main()
