"""Pure-numpy kernels: patch gather (im2col) and scatter-add (col2im).

Column layout is (N*OH*OW, C*k*k) with the C axis outermost, i.e. row r
holds the receptive field of output position r flattened as [c, ki, kj].
Window top-left for output position (i, j) is (i*stride - pad + ki*dilation).
"""

from __future__ import annotations

import numpy as np


def out_size(size: int, k: int, stride: int, dilation: int, pad: int) -> int:
    eff = (k - 1) * dilation + 1
    return (size + 2 * pad - eff) // stride + 1


def im2col(x: np.ndarray, k: int, stride: int, dilation: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = out_size(h, k, stride, dilation, pad)
    ow = out_size(w, k, stride, dilation, pad)
    if pad > 0:
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, :, pad : pad + h, pad : pad + w] = x
    else:
        xp = x
    cols = np.empty((n, c, k, k, oh, ow), dtype=x.dtype)
    for ki in range(k):
        r0 = ki * dilation
        for kj in range(k):
            c0 = kj * dilation
            cols[:, :, ki, kj] = xp[
                :, :, r0 : r0 + oh * stride : stride, c0 : c0 + ow * stride : stride
            ]
    # (n, c, k, k, oh, ow) -> (n, oh, ow, c, k, k) -> rows
    return np.ascontiguousarray(cols.transpose(0, 4, 5, 1, 2, 3)).reshape(
        n * oh * ow, c * k * k
    )


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
    cols6 = cols.reshape(n, oh, ow, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(k):
        r0 = ki * dilation
        for kj in range(k):
            c0 = kj * dilation
            xp[:, :, r0 : r0 + oh * stride : stride, c0 : c0 + ow * stride : stride] += cols6[
                :, :, ki, kj
            ]
    if pad > 0:
        return xp[:, :, pad : pad + h, pad : pad + w].copy()
    return xp
