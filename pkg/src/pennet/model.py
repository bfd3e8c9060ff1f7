"""Network assembly: pyramid-context generator and patch discriminator.

Encoder: a stride-1 conv at full resolution then stride-2 convs, leaky
activations except the last (plain rectifier). Attention transfer runs
from the deepest pair upward, producing one reconstructed map per level
below the latent. Decoder: each step upsamples by a stride-2 transposed
conv, concatenates the reconstructed map of that level, and a per-level
1x1 head decodes the concatenation to a clipped RGB prediction, coarsest
first. The discriminator is five spectrally normalized 5x5 convolutions
(stride 2,2,2,2,1) emitting a patch-logit grid at 1/16 resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import AttentionTransferNetwork, evolve_mask
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .nn import Conv2d, ConvTranspose2d, Module, SpectralConv2d
from .types import (
    BinaryMask,
    DiscriminatorLogits,
    FeaturePyramid,
    ImageSample,
    MaskPyramid,
    MultiScaleOutputs,
    ReconstructedPyramid,
    validate_image,
    validate_mask,
)

LEAKY_SLOPE = 0.2


@dataclass
class PenNetConfig:
    resolution: int = 256
    depth: int = 7
    widths: tuple[int, ...] = (16, 32, 64, 128, 256, 256, 256)
    disc_widths: tuple[int, ...] = (64, 128, 256, 512)
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        r = self.resolution
        if r <= 0 or (r & (r - 1)) != 0:
            raise ConfigError(f"resolution must be a power of two, got {r}")
        if r < 2**self.depth:
            raise ConfigError(f"resolution {r} too small for depth {self.depth}")
        if len(self.widths) != self.depth:
            raise ConfigError("widths must list one channel count per level")
        if any(w % 4 for w in self.widths):
            raise ConfigError("channel widths must be divisible by 4")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @classmethod
    def full(cls, **kw) -> "PenNetConfig":
        return cls(**kw)

    @classmethod
    def mini(cls, resolution: int = 128, dtype: str = "float32", seed: int = 0) -> "PenNetConfig":
        """Depth-5 half-width variant for tests and the overfit smoke."""
        return cls(
            resolution=resolution,
            depth=5,
            widths=(8, 16, 32, 64, 128),
            disc_widths=(32, 64, 128, 256),
            dtype=dtype,
            seed=seed,
        )

    def level_size(self, level: int) -> int:
        return self.resolution >> (level - 1)


def _check_image_mask(cfg: PenNetConfig, pixels: np.ndarray, mask: np.ndarray):
    pixels = validate_image(pixels, size=cfg.resolution)
    mask = validate_mask(mask)
    if mask.shape != pixels.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match image {pixels.shape[:2]}")
    return pixels, mask


class Generator(Module):
    def __init__(self, cfg: PenNetConfig, rng: np.random.Generator | None = None):
        super().__init__()
        self.cfg = cfg
        rng = rng or np.random.default_rng(cfg.seed)
        dt = cfg.np_dtype
        w = cfg.widths
        self.enc = [Conv2d(4, w[0], 3, rng, stride=1, dtype=dt)]
        self.enc += [
            Conv2d(w[i - 1], w[i], 3, rng, stride=2, dtype=dt) for i in range(1, cfg.depth)
        ]
        # one transfer network per level below the latent, shallow to deep
        self.atns = [
            AttentionTransferNetwork(w[i], rng, dtype=dt) for i in range(cfg.depth - 1)
        ]
        # deconv producing the level-(i+1) upsampled feature, shallow to deep
        self.dec = []
        for i in range(cfg.depth - 1):
            cin = w[cfg.depth - 1] if i == cfg.depth - 2 else 2 * w[i + 1]
            self.dec.append(ConvTranspose2d(cin, w[i], rng, dtype=dt))
        self.heads = [Conv2d(2 * w[i], 3, 1, rng, stride=1, dtype=dt) for i in range(cfg.depth - 1)]

    # ---- tensor paths -----------------------------------------------------

    def encode_t(self, images: np.ndarray, masks: list[np.ndarray]) -> list[Tensor]:
        """images (N, 3, H, W) in [-1, 1]; masks one (H, W) array per sample."""
        n = images.shape[0]
        dt = self.cfg.np_dtype
        m = np.stack(masks).astype(dt)[:, None]
        x = np.concatenate([images.astype(dt) * (1.0 - m), m], axis=1)
        feats = []
        cur = Tensor(x)
        for i, conv in enumerate(self.enc):
            cur = conv(cur)
            cur = ad.relu(cur) if i == self.cfg.depth - 1 else ad.leaky_relu(cur, LEAKY_SLOPE)
            feats.append(cur)
        return feats

    def fill_t(
        self,
        feats: list[Tensor],
        pyramids: list[MaskPyramid],
        debug: dict | None = None,
    ) -> list[Tensor]:
        """Reconstructed maps for levels 1..depth-1, deep to shallow order applied."""
        depth = self.cfg.depth
        if any(len(p) != depth for p in pyramids):
            raise ShapeError("mask pyramid level count does not match encoder depth")
        psis: list[Tensor | None] = [None] * (depth - 1)
        high = feats[depth - 1]
        for level in range(depth - 1, 0, -1):
            dbg = None
            if debug is not None:
                dbg = debug.setdefault(f"level_{level}", {})
            masks_high = [p[level + 1] for p in pyramids]
            masks_low = [p[level] for p in pyramids]
            psi = self.atns[level - 1](
                feats[level - 1], high, masks_high, masks_low, debug=dbg, level=level
            )
            psis[level - 1] = psi
            high = psi
        return psis

    def decode_t(self, latent: Tensor, psis: list[Tensor]) -> list[Tensor]:
        """Clipped RGB predictions, coarsest (level depth-1) first."""
        depth = self.cfg.depth
        outputs = []
        cur = latent
        for level in range(depth - 1, 0, -1):
            up = ad.relu(self.dec[level - 1](cur))
            psi = psis[level - 1]
            if psi.data.shape[2:] != up.data.shape[2:]:
                raise ShapeError(
                    f"decoder level {level}: psi {psi.data.shape} vs upsampled {up.data.shape}"
                )
            cur = ad.concat([psi, up], axis=1)
            outputs.append(ad.clip(self.heads[level - 1](cur), -1.0, 1.0))
        return outputs

    def forward_t(
        self,
        images: np.ndarray,
        masks: list[np.ndarray],
        debug: dict | None = None,
    ) -> tuple[list[Tensor], Tensor]:
        """Full forward: multi-scale outputs plus the composed prediction."""
        pyramids = [evolve_mask(m, self.cfg.depth) for m in masks]
        feats = self.encode_t(images, masks)
        psis = self.fill_t(feats, pyramids, debug=debug)
        outputs = self.decode_t(feats[-1], psis)
        dt = self.cfg.np_dtype
        m = np.stack(masks).astype(dt)[:, None]
        z = ad.add(
            ad.mul(outputs[-1], Tensor(m)),
            Tensor(images.astype(dt) * (1.0 - m)),
        )
        return outputs, z

    # ---- ndarray front ends ------------------------------------------------

    def _nchw(self, image: ImageSample) -> np.ndarray:
        return image.pixels.transpose(2, 0, 1)[None]

    def encode(self, image: ImageSample, mask: BinaryMask) -> FeaturePyramid:
        pixels, m = _check_image_mask(self.cfg, image.pixels, mask.values)
        feats = self.encode_t(pixels.transpose(2, 0, 1)[None], [m])
        return FeaturePyramid([f.data[0] for f in feats])

    def fill_pyramid(self, pyramid: FeaturePyramid, masks: MaskPyramid) -> ReconstructedPyramid:
        feats = [Tensor(f[None]) for f in pyramid.phi]
        psis = self.fill_t(feats, [masks])
        return ReconstructedPyramid([p.data[0] for p in psis])

    def decode(self, latent: np.ndarray, recon: ReconstructedPyramid) -> MultiScaleOutputs:
        if len(recon.psi) != self.cfg.depth - 1:
            raise ShapeError(
                f"expected {self.cfg.depth - 1} reconstructed levels, got {len(recon.psi)}"
            )
        outs = self.decode_t(Tensor(latent[None]), [Tensor(p[None]) for p in recon.psi])
        return MultiScaleOutputs([o.data[0].transpose(1, 2, 0) for o in outs])

    def generator_forward(
        self, image: ImageSample, mask: BinaryMask, debug: dict | None = None
    ) -> tuple[MultiScaleOutputs, ImageSample]:
        pixels, m = _check_image_mask(self.cfg, image.pixels, mask.values)
        outputs, z = self.forward_t(pixels.transpose(2, 0, 1)[None], [m], debug=debug)
        outs = MultiScaleOutputs([o.data[0].transpose(1, 2, 0) for o in outputs])
        composed = ImageSample(
            z.data[0].transpose(1, 2, 0), source_path=image.source_path, id=image.id
        )
        return outs, composed


def compose_output(prediction: np.ndarray, image: ImageSample, mask: BinaryMask) -> ImageSample:
    """Pixel select: masked positions from the prediction, the rest from the image."""
    pixels = image.pixels
    if prediction.shape != pixels.shape:
        raise ShapeError(f"prediction {prediction.shape} vs image {pixels.shape}")
    m = validate_mask(mask.values)
    if m.shape != pixels.shape[:2]:
        raise ShapeError(f"mask {m.shape} vs image {pixels.shape[:2]}")
    m3 = m[:, :, None].astype(pixels.dtype)
    z = prediction * m3 + pixels * (1.0 - m3)
    return ImageSample(z, source_path=image.source_path, id=image.id)


class Discriminator(Module):
    def __init__(self, cfg: PenNetConfig, rng: np.random.Generator | None = None):
        super().__init__()
        self.cfg = cfg
        rng = rng or np.random.default_rng(cfg.seed + 1)
        dt = cfg.np_dtype
        chans = cfg.disc_widths
        self.convs = []
        cin = 3
        for cout in chans:
            self.convs.append(SpectralConv2d(cin, cout, 5, rng, stride=2, dtype=dt))
            cin = cout
        self.convs.append(SpectralConv2d(cin, 1, 5, rng, stride=1, dtype=dt))

    def forward_t(self, images: Tensor, n_power_iter: int = 1, update_u: bool = True) -> Tensor:
        cur = images
        for conv in self.convs:
            cur = ad.leaky_relu(conv(cur, n_power_iter, update_u), LEAKY_SLOPE)
        return cur

    def discriminate(self, image: ImageSample) -> DiscriminatorLogits:
        pixels = validate_image(image.pixels, size=self.cfg.resolution)
        x = Tensor(pixels.transpose(2, 0, 1)[None].astype(self.cfg.np_dtype))
        logits = self.forward_t(x, update_u=False)
        return DiscriminatorLogits(logits.data[0, 0])


@dataclass
class PenNet:
    """Generator/discriminator pair built from one config."""

    cfg: PenNetConfig
    generator: Generator = field(init=False)
    discriminator: Discriminator = field(init=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.cfg.seed)
        self.generator = Generator(self.cfg, rng)
        self.discriminator = Discriminator(self.cfg, rng)
