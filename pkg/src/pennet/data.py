"""Dataset ingestion, mask generation, batch assembly.

Images are loaded with Pillow, bilinearly resized to the working
resolution and mapped to [-1, 1]. All mask handling is nearest-neighbor
and strictly binary: generated squares, or 8-bit grayscale files
thresholded at 127 (above = hole). The manifest is a plain text file,
one "path<TAB>split" record per line with split in {train, test}.

Loading is sequential here; batch order depends only on the epoch seed
and sample index, never on worker completion order, so a parallel loader
can be dropped in without changing any delivered batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeError
from .types import BinaryMask, ImageSample

log = logging.getLogger("pennet")

SPLITS = ("train", "test")
MASK_KINDS = ("center_square", "random_square", "irregular_file")


@dataclass
class DatasetManifest:
    entries: list[tuple[str, str]]
    name: str = "dataset"

    def __post_init__(self):
        for path, split in self.entries:
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r} for {path}")

    def paths(self, split: str) -> list[str]:
        return [p for p, s in self.entries if s == split]

    @property
    def counts(self) -> dict[str, int]:
        return {s: len(self.paths(s)) for s in SPLITS}

    @classmethod
    def load(cls, path: str | Path, name: str | None = None) -> "DatasetManifest":
        entries = []
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'path<TAB>split'")
            entries.append((parts[0], parts[1]))
        return cls(entries, name=name or Path(path).stem)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{p}\t{s}\n" for p, s in self.entries))


@dataclass
class MaskSpec:
    kind: str = "center_square"
    size: int = 128
    source_path: str | None = None

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"mask kind must be one of {MASK_KINDS}")
        if not 0 <= self.size <= 256:
            raise ValueError(f"mask size must lie in [0, 256], got {self.size}")
        if self.kind == "irregular_file" and not self.source_path:
            raise ValueError("irregular_file masks need a source_path")


def to_unit_range(arr: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float [-1, 1]."""
    return arr.astype(np.float64) / 255.0 * 2.0 - 1.0


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """float [-1, 1] -> uint8, round-half-up within one quantization level."""
    return np.clip(np.rint((np.asarray(pixels) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def load_image(path: str | Path, resolution: int = 256) -> ImageSample:
    """Decode, bilinearly resize to resolution x resolution, map to [-1, 1]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        if rgb.size != (resolution, resolution):
            rgb = rgb.resize((resolution, resolution), Image.BILINEAR)
        arr = np.asarray(rgb)
    return ImageSample(to_unit_range(arr), source_path=str(path), id=Path(path).stem)


def save_image(pixels: np.ndarray, path: str | Path) -> None:
    Image.fromarray(to_uint8(pixels)).save(path)


def make_center_mask(size: int, resolution: int = 256) -> BinaryMask:
    if not 0 <= size <= resolution:
        raise ValueError(f"center mask size must lie in [0, {resolution}]")
    m = np.zeros((resolution, resolution))
    start = (resolution - size) // 2
    m[start : start + size, start : start + size] = 1
    return BinaryMask(m)


def make_random_square_mask(
    size: int, rng: np.random.Generator, resolution: int = 256
) -> BinaryMask:
    if size > resolution:
        raise ValueError(f"square of {size} does not fit in {resolution}")
    m = np.zeros((resolution, resolution))
    top = int(rng.integers(0, resolution - size + 1))
    left = int(rng.integers(0, resolution - size + 1))
    m[top : top + size, left : left + size] = 1
    return BinaryMask(m)


def _nearest_resize(values: np.ndarray, resolution: int) -> np.ndarray:
    h, w = values.shape
    rows = (np.arange(resolution) * h) // resolution
    cols = (np.arange(resolution) * w) // resolution
    return values[np.ix_(rows, cols)]


def load_irregular_mask(path: str | Path, resolution: int = 256) -> BinaryMask:
    """Grayscale file, value > 127 marks the hole; nearest-neighbor resized."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    binary = (arr > 127).astype(np.float64)
    if binary.shape != (resolution, resolution):
        binary = _nearest_resize(binary, resolution)
    return BinaryMask(binary)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    Image.fromarray((mask.values * 255).astype(np.uint8), mode="L").save(path)


def mask_from_spec(spec: MaskSpec, rng: np.random.Generator, resolution: int = 256) -> BinaryMask:
    if spec.kind == "center_square":
        return make_center_mask(spec.size, resolution)
    if spec.kind == "random_square":
        return make_random_square_mask(spec.size, rng, resolution)
    src = Path(spec.source_path)
    if src.is_dir():
        files = sorted(p for p in src.iterdir() if p.is_file())
        if not files:
            raise FileNotFoundError(f"no mask files in {src}")
        src = files[int(rng.integers(0, len(files)))]
    return load_irregular_mask(src, resolution)


@dataclass
class Batch:
    images: np.ndarray  # (N, 3, H, W) in [-1, 1]
    masks: list[np.ndarray]  # N binary (H, W)
    ids: list[str] = field(default_factory=list)


def load_samples(
    paths: list[str], resolution: int = 256, skip_bad: bool = True
) -> list[ImageSample]:
    """Bulk loading; undecodable files are skipped with a warning."""
    samples = []
    for p in paths:
        try:
            samples.append(load_image(p, resolution))
        except Exception as exc:  # noqa: BLE001 - decoding errors vary by codec
            if not skip_bad:
                raise
            log.warning("skipping unreadable image %s (%s)", p, exc)
    return samples


def epoch_batches(
    manifest: DatasetManifest,
    mask_spec: MaskSpec,
    batch_size: int,
    rng: np.random.Generator,
    split: str = "train",
    resolution: int = 256,
):
    """One epoch of batches, shuffled without replacement, seed-deterministic."""
    paths = manifest.paths(split)
    if not paths:
        raise ValueError(f"manifest has no {split} entries")
    order = rng.permutation(len(paths))
    for start in range(0, len(order), batch_size):
        chunk = [paths[i] for i in order[start : start + batch_size]]
        samples = load_samples(chunk, resolution)
        if not samples:
            continue
        masks = [mask_from_spec(mask_spec, rng, resolution).values for _ in samples]
        yield Batch(
            images=np.stack([s.pixels.transpose(2, 0, 1) for s in samples]),
            masks=masks,
            ids=[s.id for s in samples],
        )


def make_batch(
    manifest: DatasetManifest,
    mask_spec: MaskSpec,
    batch_size: int,
    rng: np.random.Generator,
    split: str = "train",
    resolution: int = 256,
) -> Batch:
    """First batch of a fresh epoch."""
    return next(epoch_batches(manifest, mask_spec, batch_size, rng, split, resolution))
