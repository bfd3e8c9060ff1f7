"""Numba @njit kernels, same contracts as numpy_impl.

Plain serial loops: output rows are written exactly once (im2col) or
accumulated in a fixed loop order (col2im), so results are deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .numpy_impl import out_size


@njit(cache=True)
def _im2col_core(x, cols, k, stride, dilation, pad, oh, ow):
    n, c, h, w = x.shape
    for img in range(n):
        for oi in range(oh):
            for oj in range(ow):
                row = (img * oh + oi) * ow + oj
                col = 0
                for ch in range(c):
                    for ki in range(k):
                        ri = oi * stride - pad + ki * dilation
                        for kj in range(k):
                            cj = oj * stride - pad + kj * dilation
                            if 0 <= ri < h and 0 <= cj < w:
                                cols[row, col] = x[img, ch, ri, cj]
                            else:
                                cols[row, col] = 0.0
                            col += 1


@njit(cache=True)
def _col2im_core(cols, x, k, stride, dilation, pad, oh, ow):
    n, c, h, w = x.shape
    for img in range(n):
        for oi in range(oh):
            for oj in range(ow):
                row = (img * oh + oi) * ow + oj
                col = 0
                for ch in range(c):
                    for ki in range(k):
                        ri = oi * stride - pad + ki * dilation
                        for kj in range(k):
                            cj = oj * stride - pad + kj * dilation
                            if 0 <= ri < h and 0 <= cj < w:
                                x[img, ch, ri, cj] += cols[row, col]
                            col += 1


def im2col(x: np.ndarray, k: int, stride: int, dilation: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = out_size(h, k, stride, dilation, pad)
    ow = out_size(w, k, stride, dilation, pad)
    cols = np.empty((n * oh * ow, c * k * k), dtype=x.dtype)
    _im2col_core(np.ascontiguousarray(x), cols, k, stride, dilation, pad, oh, ow)
    return cols


def col2im(
    cols: np.ndarray,
    n: int,
    c: int,
    h: int,
    w: int,
    k: int,
    stride: int,
    dilation: int,
    pad: int,
) -> np.ndarray:
    oh = out_size(h, k, stride, dilation, pad)
    ow = out_size(w, k, stride, dilation, pad)
    x = np.zeros((n, c, h, w), dtype=cols.dtype)
    _col2im_core(np.ascontiguousarray(cols), x, k, stride, dilation, pad, oh, ow)
    return x
