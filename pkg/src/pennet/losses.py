"""Training objectives: per-scale L1, hinge adversarial terms, joint loss.

The per-scale reconstruction loss compares each decoder prediction with
the ground truth brought to the same size by repeated 2x2 box averaging
(exact antialiased halving; nearest-neighbor is reserved for masks), and
"normalized" means mean absolute error per scale so that scales weigh
equally regardless of resolution.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .types import ImageSample, MultiScaleOutputs


def halve(x: np.ndarray) -> np.ndarray:
    """2x2 box average over the trailing two axes."""
    h, w = x.shape[-2:]
    return x.reshape(*x.shape[:-2], h // 2, 2, w // 2, 2).mean(axis=(-3, -1))


def downscale_to(x: np.ndarray, size: int) -> np.ndarray:
    """Repeated exact halving of (..., H, W) down to (..., size, size)."""
    h = x.shape[-1]
    if h < size or h % size != 0 or (h // size) & (h // size - 1):
        raise ShapeError(f"cannot halve {h} down to {size}")
    while x.shape[-1] > size:
        x = halve(x)
    return x


def pyramid_l1_t(outputs: list[Tensor], ground_truth: np.ndarray) -> Tensor:
    """Sum over scales of mean |prediction - downscaled truth|.

    ``outputs`` are (N, 3, h, w) coarsest first; ``ground_truth`` is
    (N, 3, H, W) at full resolution.
    """
    total = None
    for out in outputs:
        size = out.data.shape[-1]
        target = downscale_to(ground_truth.astype(out.data.dtype), size)
        if target.shape != out.data.shape:
            raise ShapeError(f"scale {size}: target {target.shape} vs output {out.data.shape}")
        term = ad.tmean(ad.tabs(ad.sub(out, Tensor(target))))
        total = term if total is None else ad.add(total, term)
    return total


def pyramid_l1(outputs: MultiScaleOutputs, ground_truth: ImageSample) -> float:
    """Single-sample ndarray front end (HWC outputs, coarsest first)."""
    gt = ground_truth.pixels.transpose(2, 0, 1)[None]
    outs = [Tensor(o.transpose(2, 0, 1)[None]) for o in outputs.outputs]
    sizes = [o.shape[0] for o in outputs.outputs]
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise ShapeError("outputs must be distinct scales, coarsest first")
    if sizes and sizes[-1] != gt.shape[-1]:
        raise ShapeError(
            f"finest scale {sizes[-1]} does not match ground truth {gt.shape[-1]}"
        )
    return float(pyramid_l1_t(outs, gt).data)


def hinge_d_t(real_logits: Tensor, fake_logits: Tensor) -> Tensor:
    ones_r = Tensor(np.ones_like(real_logits.data))
    ones_f = Tensor(np.ones_like(fake_logits.data))
    real_term = ad.tmean(ad.relu(ad.sub(ones_r, real_logits)))
    fake_term = ad.tmean(ad.relu(ad.add(ones_f, fake_logits)))
    return ad.add(real_term, fake_term)


def hinge_d(real_logits: np.ndarray, fake_logits: np.ndarray) -> float:
    real_logits, fake_logits = np.asarray(real_logits), np.asarray(fake_logits)
    if real_logits.shape != fake_logits.shape:
        raise ShapeError("real and fake logits must share a shape")
    return float(hinge_d_t(Tensor(real_logits), Tensor(fake_logits)).data)


def hinge_g_t(fake_logits: Tensor) -> Tensor:
    return ad.neg(ad.tmean(fake_logits))


def hinge_g(fake_logits: np.ndarray) -> float:
    return float(hinge_g_t(Tensor(np.asarray(fake_logits))).data)


def total_objective(adv_g: float, pyramid: float, lambda_g: float, lambda_pd: float) -> float:
    if lambda_g <= 0 or lambda_pd <= 0:
        raise ConfigError("loss weights must be positive")
    return lambda_g * adv_g + lambda_pd * pyramid


def total_objective_t(adv_g: Tensor, pyramid: Tensor, lambda_g: float, lambda_pd: float) -> Tensor:
    if lambda_g <= 0 or lambda_pd <= 0:
        raise ConfigError("loss weights must be positive")
    return ad.add(ad.scale(adv_g, lambda_g), ad.scale(pyramid, lambda_pd))
