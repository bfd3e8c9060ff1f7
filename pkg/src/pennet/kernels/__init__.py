"""Backend-dispatched array kernels."""

from __future__ import annotations

import numpy as np

from ..backend import active_backend
from . import numpy_impl
from .numpy_impl import out_size

__all__ = ["im2col", "col2im", "out_size"]


def _impl():
    if active_backend() == "numba":
        from . import numba_impl

        return numba_impl
    return numpy_impl


def im2col(x: np.ndarray, k: int, stride: int = 1, dilation: int = 1, pad: int = 0) -> np.ndarray:
    return _impl().im2col(x, k, stride, dilation, pad)


def col2im(
    cols: np.ndarray,
    n: int,
    c: int,
    h: int,
    w: int,
    k: int,
    stride: int = 1,
    dilation: int = 1,
    pad: int = 0,
) -> np.ndarray:
    return _impl().col2im(cols, n, c, h, w, k, stride, dilation, pad)
