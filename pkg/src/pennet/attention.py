"""Cross-layer attention transfer.

A coarse feature map is cut into 3x3 patches (stride 1, zero-padded);
patches are split into hole/context by the mask value at their center.
Cosine similarities between L2-normalized hole and context patches give a
row-stochastic score matrix. Those scores then weight a copy of 4x4
stride-2 patches from the next finer map: each coarse grid location owns
the 4x4 footprint at top-left (2r-1, 2c-1) on the fine map, overlapping
pastes are averaged by per-pixel overlap count, and context pixels always
keep their original values. A four-branch dilated convolution block with
a residual connection refines the result.

Scores are formed by matmul of patch-row matrices, which is the
convolution-with-context-filters formulation in GEMM form; the transfer
is the matching transposed convolution (fold).
"""

from __future__ import annotations

import logging

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import AllHolesError, ConfigError, ShapeError
from .kernels import col2im
from .nn import Conv2d, Module
from .types import AttentionScores, MaskPyramid, validate_mask

log = logging.getLogger("pennet")

NORM_EPS = 1e-8
AFFINITY_PATCH = 3
TRANSFER_PATCH = 4
TRANSFER_STRIDE = 2
DILATION_RATES = (1, 2, 4, 8)


def evolve_mask(mask: np.ndarray, levels: int) -> MaskPyramid:
    """Per-level masks by repeated factor-2 nearest-neighbor downsampling.

    Level 1 is the input mask itself; level l keeps every 2**(l-1)-th
    pixel, i.e. out[i, j] = mask[2i, 2j] applied level by level.
    """
    mask = validate_mask(mask)
    chain = [mask]
    for _ in range(levels - 1):
        chain.append(chain[-1][::2, ::2])
    return MaskPyramid(chain)


def split_patch_indices(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hole/context grid indices; a patch follows the mask at its center."""
    flat = mask.reshape(-1)
    return np.flatnonzero(flat == 1), np.flatnonzero(flat == 0)


def affinity_tensor(feature: Tensor, mask: np.ndarray):
    """Attention rows as a differentiable tensor.

    Returns (alpha (J, N), hole_indices, context_indices). Raises
    AllHolesError when the mask leaves no context patch.
    """
    c, h, w = feature.data.shape
    mask = validate_mask(mask)
    if mask.shape != (h, w):
        raise ShapeError(f"mask {mask.shape} does not match feature grid {(h, w)}")
    hole_idx, ctx_idx = split_patch_indices(mask)
    if len(ctx_idx) == 0:
        raise AllHolesError(f"no context patches on a {h}x{w} level")
    patches = ad.unfold(feature, AFFINITY_PATCH, stride=1, pad=AFFINITY_PATCH // 2)
    sq = ad.tsum(ad.mul(patches, patches), axis=1, keepdims=True)
    norms = ad.maximum_scalar(ad.sqrt(sq), NORM_EPS)
    normed = ad.div(patches, norms)
    hole_rows = ad.index_rows(normed, hole_idx)
    ctx_rows = ad.index_rows(normed, ctx_idx)
    scores = ad.matmul(hole_rows, ad.transpose(ctx_rows))
    alpha = ad.softmax_rows(scores)
    return alpha, hole_idx, ctx_idx


def region_affinity(feature: np.ndarray, mask: np.ndarray, patch_size: int = 3, stride: int = 1) -> AttentionScores:
    """Ndarray front end of :func:`affinity_tensor`."""
    if patch_size != AFFINITY_PATCH or stride != 1:
        raise ConfigError("affinity is defined for 3x3 patches at stride 1")
    feature = np.asarray(feature)
    alpha, hole_idx, ctx_idx = affinity_tensor(Tensor(feature), mask)
    return AttentionScores(
        alpha=alpha.data,
        hole_indices=hole_idx,
        context_indices=ctx_idx,
        grid_shape=feature.shape[1:],
    )


def overlap_counts(hole_idx: np.ndarray, grid_shape: tuple[int, int], low_shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel number of hole-patch footprints covering each fine pixel."""
    gh, gw = grid_shape
    rows = np.zeros((gh * gw, TRANSFER_PATCH * TRANSFER_PATCH), dtype=np.float64)
    rows[hole_idx] = 1.0
    counts = col2im(
        rows, 1, 1, low_shape[0], low_shape[1], TRANSFER_PATCH, TRANSFER_STRIDE, 1, 1
    )[0, 0]
    return counts


def transfer_tensor(
    alpha: Tensor,
    hole_idx: np.ndarray,
    ctx_idx: np.ndarray,
    grid_shape: tuple[int, int],
    low: Tensor,
    low_mask: np.ndarray,
) -> Tensor:
    """Weighted copy of fine-map context patches into hole footprints."""
    c, lh, lw = low.data.shape
    gh, gw = grid_shape
    if (lh, lw) != (2 * gh, 2 * gw):
        raise ShapeError(f"low map {(lh, lw)} is not 2x the affinity grid {(gh, gw)}")
    low_mask = validate_mask(low_mask)
    if low_mask.shape != (lh, lw):
        raise ShapeError("low mask does not match low feature")
    if alpha.data.shape != (len(hole_idx), len(ctx_idx)):
        raise ShapeError("alpha shape disagrees with hole/context index sets")
    if len(hole_idx) == 0:
        return low
    dtype = low.data.dtype
    low_patches = ad.unfold(low, TRANSFER_PATCH, stride=TRANSFER_STRIDE, pad=1)
    ctx_patches = ad.index_rows(low_patches, ctx_idx)
    pasted = ad.matmul(alpha, ctx_patches)
    full = ad.scatter_rows(pasted, hole_idx, gh * gw)
    acc = ad.fold(full, (c, lh, lw), TRANSFER_PATCH, stride=TRANSFER_STRIDE, pad=1)

    counts = overlap_counts(hole_idx, grid_shape, (lh, lw))
    covered = (low_mask == 1) & (counts > 0)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    sel = covered.astype(dtype)
    averaged = ad.mul(acc, Tensor((inv * covered).astype(dtype)))
    kept = ad.mul(low, Tensor((1.0 - sel).astype(dtype)))
    return ad.add(averaged, kept)


def attention_transfer(
    scores: AttentionScores, low_feature: np.ndarray, low_mask: np.ndarray
) -> np.ndarray:
    """Ndarray front end of :func:`transfer_tensor`."""
    out = transfer_tensor(
        Tensor(scores.alpha),
        scores.hole_indices,
        scores.context_indices,
        scores.grid_shape,
        Tensor(np.asarray(low_feature)),
        low_mask,
    )
    return out.data


def save_attention_dump(debug: dict, path) -> None:
    """Write collected attention internals to a compressed npz archive.

    Keys are ``level_<l>/sample_<i>/<field>`` with fields ``alpha``
    (holes x context scores), ``hole_indices``, ``context_indices``
    (flat grid indices at the affinity level) and ``filled`` (the
    transferred feature map before refinement).
    """
    flat = {}
    for level_key, per_level in debug.items():
        for sample_key, fields in per_level.items():
            for field, value in fields.items():
                flat[f"{level_key}/{sample_key}/{field}"] = value
    np.savez_compressed(path, **flat)


class DilatedRefiner(Module):
    """Four parallel 3x3 dilated convolutions, concatenated, residual-added."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        if channels % 4 != 0:
            raise ConfigError(f"refiner needs channels divisible by 4, got {channels}")
        self.branches = [
            Conv2d(channels, channels // 4, 3, rng, dilation=rate, dtype=dtype)
            for rate in DILATION_RATES
        ]

    def __call__(self, x: Tensor) -> Tensor:
        fused = ad.concat([branch(x) for branch in self.branches], axis=1)
        return ad.add(x, fused)


class AttentionTransferNetwork(Module):
    """One pyramid step: affinity on the coarse map, transfer, refinement."""

    def __init__(self, low_channels: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.refiner = DilatedRefiner(low_channels, rng, dtype=dtype)

    def fill_one(
        self,
        low: Tensor,
        high: Tensor,
        mask_high: np.ndarray,
        mask_low: np.ndarray,
        debug: dict | None = None,
        level: int | None = None,
    ) -> Tensor:
        """Transfer for a single sample; returns the filled (unrefined) map."""
        hole_idx, _ = split_patch_indices(validate_mask(mask_high))
        if len(hole_idx) == 0:
            return low
        try:
            alpha, hole_idx, ctx_idx = affinity_tensor(high, mask_high)
        except AllHolesError:
            log.warning(
                "level %s is fully masked; skipping transfer, refinement only", level
            )
            return low
        filled = transfer_tensor(
            alpha, hole_idx, ctx_idx, high.data.shape[1:], low, mask_low
        )
        if debug is not None:
            debug["alpha"] = alpha.data.copy()
            debug["hole_indices"] = hole_idx.copy()
            debug["context_indices"] = ctx_idx.copy()
            debug["filled"] = filled.data.copy()
        return filled

    def __call__(
        self,
        low: Tensor,
        high: Tensor,
        masks_high: list[np.ndarray],
        masks_low: list[np.ndarray],
        debug: dict | None = None,
        level: int | None = None,
    ) -> Tensor:
        """Batched forward: low (N, C, H, W), high (N, C', H/2, W/2)."""
        filled = []
        for i in range(low.data.shape[0]):
            dbg = None
            if debug is not None:
                dbg = debug.setdefault(f"sample_{i}", {})
            filled.append(
                self.fill_one(
                    ad.select_batch(low, i),
                    ad.select_batch(high, i),
                    masks_high[i],
                    masks_low[i],
                    debug=dbg,
                    level=level,
                )
            )
        return self.refiner(ad.stack_batch(filled))
