"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray and remembers how it was produced; calling
``backward()`` on a scalar loss walks the graph in reverse topological
order and accumulates ``.grad`` on every tensor that requires it. The op
set is exactly what the inpainting network needs: broadcast arithmetic,
matmul, (transposed) convolution via im2col/col2im kernels, patch
gather/scatter for attention, softmax rows, and a few pointwise
nonlinearities. Convolution backward formulas are the standard GEMM
duals: dW = gᵀ·cols, dX = col2im(g·W).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .kernels import col2im, im2col, out_size


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without gradient requires a scalar tensor")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return Tensor(arr)


def _reduce_broadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast to reach g's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, out_data, da, db) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    req = a.requires_grad or b.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a, b))

    def bw(g):
        if a.requires_grad:
            a.accumulate(_reduce_broadcast(da(g), a.data.shape))
        if b.requires_grad:
            b.accumulate(_reduce_broadcast(db(g), b.data.shape))

    out._backward = bw
    return out


def _unary(a, out_data, da) -> Tensor:
    a = as_tensor(a)
    out = Tensor(out_data, requires_grad=a.requires_grad, parents=(a,))
    if a.requires_grad:
        out._backward = lambda g: a.accumulate(da(g))
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(
        a,
        b,
        a.data / b.data,
        lambda g: g / b.data,
        lambda g: -g * a.data / (b.data * b.data),
    )


def neg(a) -> Tensor:
    return _unary(a, -as_tensor(a).data, lambda g: -g)


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    return _unary(a, a.data * s, lambda g: g * s)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data @ b.data, lambda g: g @ b.data.T, lambda g: a.data.T @ g)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, a.data.T, lambda g: g.T)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return _unary(a, a.data.reshape(shape), lambda g: g.reshape(old))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def da(g):
        if axis is None:
            return np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.data.shape).astype(a.data.dtype, copy=False)

    return _unary(a, out_data, da)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.data.shape[i] for i in axis]))
    else:
        n = a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tabs(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.abs(a.data), lambda g: g * np.sign(a.data))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)
    return _unary(a, out_data, lambda g: g * (0.5 / np.maximum(out_data, np.finfo(out_data.dtype).tiny)))


def relu(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.maximum(a.data, 0), lambda g: g * (a.data > 0))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    out_data = np.where(a.data > 0, a.data, a.data * slope)
    return _unary(a, out_data, lambda g: g * np.where(a.data > 0, 1.0, slope).astype(a.data.dtype))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _unary(a, np.clip(a.data, lo, hi), lambda g: g * mask)


def maximum_scalar(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.maximum(a.data, c), lambda g: g * (a.data > c))


def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a 2D tensor (numerically stabilized)."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def da(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (g - dot) * y

    return _unary(a, y, da)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    req = any(t.requires_grad for t in tensors)
    out = Tensor(out_data, requires_grad=req, parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate(g[tuple(idx)])

    out._backward = bw
    return out


def select_batch(a, i: int) -> Tensor:
    """Slice one sample out of a batched tensor along axis 0."""
    a = as_tensor(a)

    def da(g):
        full = np.zeros_like(a.data)
        full[i] = g
        return full

    return _unary(a, a.data[i], da)


def stack_batch(tensors: Sequence[Tensor]) -> Tensor:
    """Stack per-sample tensors back into a batch along a new axis 0."""
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=0)
    req = any(t.requires_grad for t in tensors)
    out = Tensor(out_data, requires_grad=req, parents=tuple(tensors))

    def bw(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate(g[i])

    out._backward = bw
    return out


def index_rows(a, idx: np.ndarray) -> Tensor:
    """Gather rows of a 2D tensor. ``idx`` must contain unique indices."""
    a = as_tensor(a)

    def da(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return full

    return _unary(a, a.data[idx], da)


def scatter_rows(a, idx: np.ndarray, total_rows: int) -> Tensor:
    """Place rows of ``a`` at ``idx`` in a zero matrix of ``total_rows`` rows."""
    a = as_tensor(a)
    out_data = np.zeros((total_rows, a.data.shape[1]), dtype=a.data.dtype)
    out_data[idx] = a.data
    return _unary(a, out_data, lambda g: g[idx])


# ---------------------------------------------------------------------------
# Convolution ops (NCHW, weights (Cout, Cin, k, k) / deconv (Cin, Cout, k, k))
# ---------------------------------------------------------------------------


def conv2d(x, w, b=None, stride: int = 1, dilation: int = 1, pad: int | None = None) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    n, cin, h, wd = x.data.shape
    cout, cin_w, k, _ = w.data.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input {cin}, weight expects {cin_w}")
    if pad is None:
        pad = dilation * (k - 1) // 2
    oh = out_size(h, k, stride, dilation, pad)
    ow = out_size(wd, k, stride, dilation, pad)
    cols = im2col(x.data, k, stride, dilation, pad)
    w2d = w.data.reshape(cout, -1)
    out2d = cols @ w2d.T
    if b is not None:
        b = as_tensor(b)
        out2d += b.data
    out_data = out2d.reshape(n, oh, ow, cout).transpose(0, 3, 1, 2)

    parents = (x, w) if b is None else (x, w, b)
    req = any(p.requires_grad for p in parents)
    out = Tensor(np.ascontiguousarray(out_data), requires_grad=req, parents=parents)

    def bw(g):
        g2d = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, cout)
        if w.requires_grad:
            w.accumulate((g2d.T @ cols).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate(g2d.sum(axis=0))
        if x.requires_grad:
            dcols = g2d @ w2d
            x.accumulate(col2im(dcols, n, cin, h, wd, k, stride, dilation, pad))

    out._backward = bw
    return out


def conv_transpose2d(
    x,
    w,
    b=None,
    stride: int = 2,
    pad: int = 1,
    output_padding: int = 1,
) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    n, cin, h, wd = x.data.shape
    cin_w, cout, k, _ = w.data.shape
    if cin != cin_w:
        raise ValueError(f"conv_transpose2d channel mismatch: input {cin}, weight expects {cin_w}")
    oh = (h - 1) * stride - 2 * pad + k + output_padding
    ow = (wd - 1) * stride - 2 * pad + k + output_padding
    if out_size(oh, k, stride, 1, pad) != h or out_size(ow, k, stride, 1, pad) != wd:
        raise ValueError("conv_transpose2d geometry is not the exact adjoint of its forward conv")
    x2d = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1)).reshape(-1, cin)
    w2d = w.data.reshape(cin, -1)
    cols = x2d @ w2d
    out_data = col2im(cols, n, cout, oh, ow, k, stride, 1, pad)
    if b is not None:
        b = as_tensor(b)
        out_data += b.data.reshape(1, cout, 1, 1)

    parents = (x, w) if b is None else (x, w, b)
    req = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=req, parents=parents)

    def bw(g):
        gcols = im2col(np.ascontiguousarray(g), k, stride, 1, pad)
        if x.requires_grad:
            dx2d = gcols @ w2d.T
            x.accumulate(np.ascontiguousarray(dx2d.reshape(n, h, wd, cin).transpose(0, 3, 1, 2)))
        if w.requires_grad:
            w.accumulate((x2d.T @ gcols).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate(g.sum(axis=(0, 2, 3)))

    out._backward = bw
    return out


def unfold(x, k: int, stride: int = 1, pad: int = 0) -> Tensor:
    """Extract sliding patches from a single (C, H, W) map as rows (L, C*k*k)."""
    x = as_tensor(x)
    c, h, w = x.data.shape
    rows = im2col(x.data[None], k, stride, 1, pad)

    def da(g):
        return col2im(g, 1, c, h, w, k, stride, 1, pad)[0]

    return _unary(x, rows, da)


def fold(x, shape: tuple[int, int, int], k: int, stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of :func:`unfold`: scatter-add patch rows back onto a (C, H, W) map."""
    x = as_tensor(x)
    c, h, w = shape
    out_data = col2im(x.data, 1, c, h, w, k, stride, 1, pad)[0]

    def da(g):
        return im2col(g[None], k, stride, 1, pad)

    return _unary(x, out_data, da)


def spectral_normalize(w, u: np.ndarray, v: np.ndarray, sigma: float) -> Tensor:
    """Divide a weight by its leading singular value.

    ``u``, ``v`` and ``sigma`` come from power iteration run outside the
    graph; backward treats them as the exact singular triplet, giving
    d(W/sigma) = g/sigma - (g:W) u v^T / sigma^2.
    """
    w = as_tensor(w)
    out_data = w.data / sigma

    def da(g):
        inner = float((g * w.data).sum())
        return g / sigma - (inner / sigma**2) * np.outer(u, v).reshape(w.data.shape)

    return _unary(w, out_data, da)


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if isinstance(t, Parameter)]
