"""Layer containers: convolutions, transposed convolutions, spectral norm.

Modules hold :class:`~pennet.autodiff.Parameter` leaves plus non-trainable
buffers (the persistent power-iteration vectors). Parameter/buffer names
are derived from attribute paths and are the keys used by checkpoints.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


class Module:
    def __init__(self):
        self._buffers: dict[str, np.ndarray] = {}

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            if name == "_buffers":
                continue
            path = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for name, value in self._buffers.items():
            yield f"{prefix}{name}", value
        for name, value in vars(self).items():
            if name == "_buffers":
                continue
            path = f"{prefix}{name}"
            if isinstance(value, Module):
                yield from value.named_buffers(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{path}.{i}.")

    def set_buffer(self, path: str, value: np.ndarray) -> None:
        parts = path.split(".")
        obj = self
        for part in parts[:-1]:
            obj = obj[int(part)] if part.isdigit() else getattr(obj, part)
        if not isinstance(obj, Module) or parts[-1] not in obj._buffers:
            raise KeyError(path)
        obj._buffers[parts[-1]] = value

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def he_std(fan_in: int) -> float:
    return float(np.sqrt(2.0 / fan_in))


class Conv2d(Module):
    """Same-padded convolution; stride 2 exactly halves even spatial sizes."""

    def __init__(self, cin, cout, k, rng: np.random.Generator, stride=1, dilation=1, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.dilation = dilation
        std = he_std(cin * k * k)
        self.weight = Parameter(rng.normal(0.0, std, size=(cout, cin, k, k)).astype(dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride, dilation=self.dilation)


class ConvTranspose2d(Module):
    """3x3 stride-2 transposed convolution that exactly doubles spatial size."""

    def __init__(self, cin, cout, rng: np.random.Generator, k=3, dtype=np.float32):
        super().__init__()
        self.k = k
        std = he_std(cin * k * k)
        self.weight = Parameter(rng.normal(0.0, std, size=(cin, cout, k, k)).astype(dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv_transpose2d(x, self.weight, self.bias, stride=2, pad=1, output_padding=1)


class SpectralConv2d(Module):
    """Convolution whose weight is divided by its top singular value.

    The singular value is estimated by power iteration on the (cout, rest)
    flattening of the kernel; the left vector persists across calls and is
    advanced only when ``update_u`` is set (once per discriminator forward
    during training).
    """

    def __init__(self, cin, cout, k, rng: np.random.Generator, stride=1, dtype=np.float32):
        super().__init__()
        self.stride = stride
        std = he_std(cin * k * k)
        self.weight = Parameter(rng.normal(0.0, std, size=(cout, cin, k, k)).astype(dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))
        u = rng.normal(0.0, 1.0, size=cout)
        self.register_buffer("u", (u / np.linalg.norm(u)).astype(dtype))

    def _power_iterate(self, n_iter: int, converge_tol: float | None = None):
        w2 = self.weight.data.reshape(self.weight.data.shape[0], -1)
        u = self._buffers["u"].astype(w2.dtype, copy=True)
        tiny = np.finfo(w2.dtype).tiny
        v = None
        sigma = 0.0
        max_iter = 5000 if converge_tol is not None else max(1, n_iter)
        for it in range(max_iter):
            v = w2.T @ u
            v /= max(np.linalg.norm(v), tiny)
            u = w2 @ v
            u /= max(np.linalg.norm(u), tiny)
            new_sigma = float(u @ (w2 @ v))
            if (
                converge_tol is not None
                and it + 1 >= n_iter
                and abs(new_sigma - sigma) <= converge_tol * max(abs(new_sigma), tiny)
            ):
                sigma = new_sigma
                break
            sigma = new_sigma
        return u, v, sigma

    def normalized_weight(
        self, n_power_iter: int = 1, update_u: bool = True, converge_tol: float | None = None
    ) -> Tensor:
        u, v, sigma = self._power_iterate(n_power_iter, converge_tol)
        if update_u:
            self._buffers["u"] = u.astype(self._buffers["u"].dtype)
        return ad.spectral_normalize(self.weight, u, v, sigma)

    def __call__(self, x: Tensor, n_power_iter: int = 1, update_u: bool = True) -> Tensor:
        wn = self.normalized_weight(n_power_iter, update_u)
        return ad.conv2d(x, wn, self.bias, stride=self.stride)
