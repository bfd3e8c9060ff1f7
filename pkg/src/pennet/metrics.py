"""Evaluation metrics and report assembly.

L1 is mean absolute error on the [0, 1] pixel scale, reported x100.
MS-SSIM follows the original multi-scale construction: 11x11 Gaussian
window (sigma 1.5), K = (0.01, 0.03), per-scale contrast-structure terms
at five scales weighted (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), with
luminance applied at the coarsest scale only. Distribution metrics
(inception score, Frechet distance) are computed against a pluggable
feature/classifier provider; pretrained weights are external inputs and
the metrics are simply omitted when no provider is supplied.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy import linalg as sla

from .data import DatasetManifest, MaskSpec, load_image, mask_from_spec
from .errors import ShapeError
from .types import ImageSample

log = logging.getLogger("pennet")

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
GAUSSIAN_SIZE = 11
GAUSSIAN_SIGMA = 1.5
K1, K2 = 0.01, 0.03
REPORT_SCHEMA_VERSION = 1


class EmbeddingProvider(Protocol):
    """Feature extractor + classifier backed by external pretrained weights."""

    def embed(self, images: np.ndarray) -> np.ndarray:
        """(n, H, W, 3) in [-1, 1] -> (n, d) feature vectors."""
        ...

    def classify(self, images: np.ndarray) -> np.ndarray:
        """(n, H, W, 3) in [-1, 1] -> (n, K) probability rows."""
        ...


def l1_metric(z: ImageSample, x: ImageSample) -> float:
    """Mean absolute error on the [0, 1] scale, x100."""
    if z.pixels.shape != x.pixels.shape:
        raise ShapeError("images must share a shape")
    return float(np.abs(z.pixels - x.pixels).mean() / 2.0 * 100.0)


def _gaussian_window(size: int = GAUSSIAN_SIZE, sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable valid-mode Gaussian filtering of a 2D image."""
    k = len(window)
    h, w = img.shape
    rows = np.zeros((h, w - k + 1))
    for i in range(k):
        rows += window[i] * img[:, i : w - k + 1 + i]
    out = np.zeros((h - k + 1, w - k + 1))
    for i in range(k):
        out += window[i] * rows[i : h - k + 1 + i, :]
    return out


def _ssim_terms(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Mean luminance term and mean contrast-structure term on one scale."""
    window = _gaussian_window()
    c1 = (K1) ** 2
    c2 = (K2) ** 2
    mu1 = _filter_valid(a, window)
    mu2 = _filter_valid(b, window)
    s11 = _filter_valid(a * a, window) - mu1 * mu1
    s22 = _filter_valid(b * b, window) - mu2 * mu2
    s12 = _filter_valid(a * b, window) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1**2 + mu2**2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return float(lum.mean()), float(cs.mean())


def _halve_even(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim(z: ImageSample, x: ImageSample) -> float:
    """Multi-scale structural similarity in [0, 1], channels averaged."""
    if z.pixels.shape != x.pixels.shape:
        raise ShapeError("images must share a shape")
    a_all = (z.pixels.astype(np.float64) + 1.0) / 2.0
    b_all = (x.pixels.astype(np.float64) + 1.0) / 2.0
    min_side = min(a_all.shape[0], a_all.shape[1])
    scales = len(MS_SSIM_WEIGHTS)
    while scales > 1 and (min_side >> (scales - 1)) < GAUSSIAN_SIZE:
        scales -= 1
    weights = np.array(MS_SSIM_WEIGHTS[:scales])
    if scales < len(MS_SSIM_WEIGHTS):
        weights = weights / weights.sum()
        log.info("ms_ssim: image too small for 5 scales, using %d", scales)
    vals = []
    for c in range(a_all.shape[2]):
        a, b = a_all[:, :, c], b_all[:, :, c]
        score = 1.0
        for j in range(scales):
            lum, cs = _ssim_terms(a, b)
            if j < scales - 1:
                score *= max(cs, 0.0) ** weights[j]
                a, b = _halve_even(a), _halve_even(b)
            else:
                score *= max(lum * cs, 0.0) ** weights[j]
        vals.append(score)
    return float(np.mean(vals))


def inception_score(images: np.ndarray, provider: EmbeddingProvider) -> float:
    """exp of the mean KL between per-image class rows and their marginal."""
    probs = np.asarray(provider.classify(images), dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError("classifier must return (n, K) probability rows")
    sums = probs.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-5):
        raise ValueError("classifier rows must sum to 1")
    marginal = probs.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(probs > 0, np.log(probs) - np.log(marginal), 0.0)
    kl = (probs * logs).sum(axis=1)
    return float(np.exp(kl.mean()))


def fid(
    real_images: np.ndarray, fake_images: np.ndarray, provider: EmbeddingProvider
) -> float:
    """Frechet distance between Gaussians fitted to provider embeddings."""
    er = np.asarray(provider.embed(real_images), dtype=np.float64)
    ef = np.asarray(provider.embed(fake_images), dtype=np.float64)
    return frechet_distance(er, ef)


def frechet_distance(er: np.ndarray, ef: np.ndarray, eps: float = 1e-6) -> float:
    mu_r, mu_f = er.mean(axis=0), ef.mean(axis=0)
    cov_r = np.cov(er, rowvar=False)
    cov_f = np.cov(ef, rowvar=False)
    dim = er.shape[1]
    if er.shape[0] <= dim or ef.shape[0] <= dim:
        log.warning("fid: fewer samples than embedding dim, regularizing covariance")
        cov_r = cov_r + eps * np.eye(dim)
        cov_f = cov_f + eps * np.eye(dim)
    diff = mu_r - mu_f
    covmean, _ = sla.sqrtm(cov_r @ cov_f, disp=False)
    if not np.isfinite(covmean).all():
        covmean, _ = sla.sqrtm((cov_r + eps * np.eye(dim)) @ (cov_f + eps * np.eye(dim)), disp=False)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    val = float(diff @ diff + np.trace(cov_r) + np.trace(cov_f) - 2 * np.trace(covmean))
    return max(val, 0.0)


@dataclass
class EvalRecord:
    id: str
    l1: float
    ms_ssim: float


@dataclass
class EvalReport:
    records: list[EvalRecord]
    mask: MaskSpec
    checkpoint_id: str = ""
    dataset: str = ""
    inception: float | None = None
    fid: float | None = None
    schema_version: int = REPORT_SCHEMA_VERSION
    aggregates: dict = field(init=False)

    def __post_init__(self):
        self.aggregates = {
            "l1": float(np.mean([r.l1 for r in self.records])) if self.records else 0.0,
            "ms_ssim": float(np.mean([r.ms_ssim for r in self.records])) if self.records else 0.0,
        }
        if self.inception is not None:
            self.aggregates["inception_score"] = self.inception
        if self.fid is not None:
            self.aggregates["fid"] = self.fid

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "dataset": self.dataset,
            "checkpoint_id": self.checkpoint_id,
            "mask": asdict(self.mask),
            "count": len(self.records),
            "records": [asdict(r) for r in self.records],
            "aggregates": self.aggregates,
        }
        return json.dumps(payload, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def evaluate(
    manifest: DatasetManifest,
    model,
    mask_spec: MaskSpec,
    provider: EmbeddingProvider | None = None,
    split: str = "test",
    seed: int = 0,
    checkpoint_id: str = "",
) -> EvalReport:
    """Inpaint every test image under the mask spec and score the results."""
    from .types import BinaryMask

    rng = np.random.default_rng(seed)
    resolution = model.cfg.resolution
    records = []
    reals, fakes = [], []
    for path in manifest.paths(split):
        sample = load_image(path, resolution)
        mask = mask_from_spec(mask_spec, rng, resolution)
        _, z = model.generator.generator_forward(sample, BinaryMask(mask.values))
        gt = ImageSample(sample.pixels.astype(z.pixels.dtype), id=sample.id)
        records.append(
            EvalRecord(id=sample.id, l1=l1_metric(z, gt), ms_ssim=ms_ssim(z, gt))
        )
        if provider is not None:
            reals.append(gt.pixels)
            fakes.append(z.pixels)
    is_val = fid_val = None
    if provider is not None and fakes:
        fake_stack = np.stack(fakes)
        is_val = inception_score(fake_stack, provider)
        fid_val = fid(np.stack(reals), fake_stack, provider)
    elif provider is None:
        log.info("no embedding provider; inception score and fid omitted")
    return EvalReport(
        records=records,
        mask=mask_spec,
        checkpoint_id=checkpoint_id,
        dataset=manifest.name,
        inception=is_val,
        fid=fid_val,
    )
