"""Domain value types with their validity checks.

Images live in [-1, 1] as float arrays of shape (H, W, 3); masks are
{0, 1} arrays of shape (H, W) where 1 marks the missing region. Feature
maps are channel-first (C, H, W) per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonBinaryMaskError, ShapeError


def validate_image(pixels: np.ndarray, size: int | None = None) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {pixels.shape}")
    if size is not None and pixels.shape[:2] != (size, size):
        raise ShapeError(f"image must be {size}x{size}, got {pixels.shape[:2]}")
    if pixels.min() < -1.0 - 1e-6 or pixels.max() > 1.0 + 1e-6:
        raise ValueError("image values must lie in [-1, 1]")
    return pixels


def validate_mask(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ShapeError(f"mask must be 2D, got shape {values.shape}")
    if not np.all((values == 0) | (values == 1)):
        raise NonBinaryMaskError("mask must contain only 0 and 1")
    return values


@dataclass
class ImageSample:
    pixels: np.ndarray
    source_path: str = ""
    id: str = ""

    def __post_init__(self):
        self.pixels = validate_image(self.pixels)


@dataclass
class BinaryMask:
    values: np.ndarray

    def __post_init__(self):
        self.values = validate_mask(self.values)

    @property
    def hole_count(self) -> int:
        return int(self.values.sum())


@dataclass
class MaskPyramid:
    masks: list[np.ndarray]

    def __post_init__(self):
        self.masks = [validate_mask(m) for m in self.masks]

    def __len__(self) -> int:
        return len(self.masks)

    def __getitem__(self, level: int) -> np.ndarray:
        """Mask for 1-based encoder level ``level``."""
        return self.masks[level - 1]


@dataclass
class FeaturePyramid:
    phi: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.phi)


@dataclass
class ReconstructedPyramid:
    psi: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.psi)


@dataclass
class MultiScaleOutputs:
    outputs: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.outputs)

    @property
    def final(self) -> np.ndarray:
        """Full-resolution prediction (level 1)."""
        return self.outputs[-1]


@dataclass
class DiscriminatorLogits:
    values: np.ndarray


@dataclass
class AttentionScores:
    """Row-stochastic affinity from hole patches to context patches."""

    alpha: np.ndarray
    hole_indices: np.ndarray
    context_indices: np.ndarray
    grid_shape: tuple[int, int]

    def __post_init__(self):
        if self.alpha.ndim != 2:
            raise ShapeError("alpha must be (holes, context)")
        if self.alpha.shape != (len(self.hole_indices), len(self.context_indices)):
            raise ShapeError("alpha shape disagrees with index sets")


@dataclass
class LossBundle:
    pyramid: float
    adv_g: float
    adv_d: float
    lambda_g: float
    lambda_pd: float
    total_g: float = field(init=False)

    def __post_init__(self):
        if self.pyramid < 0 or self.adv_d < 0:
            raise ValueError("pyramid and adv_d losses are nonnegative by construction")
        self.total_g = self.lambda_g * self.adv_g + self.lambda_pd * self.pyramid
