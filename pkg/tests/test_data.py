"""Data pipeline checks: loading, masks, determinism, statistics."""

import numpy as np
import pytest
from PIL import Image

from pennet.data import (
    DatasetManifest,
    MaskSpec,
    epoch_batches,
    load_image,
    load_irregular_mask,
    make_batch,
    make_center_mask,
    make_random_square_mask,
    mask_from_spec,
    save_image,
    save_mask,
    to_uint8,
)
from pennet.types import BinaryMask


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for i in range(8):
        arr = rng.integers(0, 256, size=(100 + i, 120, 3), dtype=np.uint8)
        p = tmp_path / f"img_{i}.png"
        Image.fromarray(arr).save(p)
        paths.append(str(p))
    return tmp_path, paths


class TestLoadImage:
    def test_resizes_to_target(self, image_dir):
        _, paths = image_dir
        s = load_image(paths[0], 256)
        assert s.pixels.shape == (256, 256, 3)
        assert s.pixels.min() >= -1 and s.pixels.max() <= 1

    def test_constant_gray_maps_to_affine_value(self, tmp_path):
        p = tmp_path / "gray.png"
        Image.fromarray(np.full((64, 64, 3), 128, dtype=np.uint8)).save(p)
        s = load_image(p, 256)
        np.testing.assert_allclose(s.pixels, 2 * (128 / 255) - 1, atol=1e-12)

    def test_round_trip_within_quantization(self, image_dir, tmp_path):
        _, paths = image_dir
        s = load_image(paths[1], 256)
        out = tmp_path / "rt.png"
        save_image(s.pixels, out)
        back = load_image(out, 256)
        assert np.abs(back.pixels - s.pixels).max() <= 1 / 127.5

    def test_unreadable_file_raises(self, tmp_path):
        p = tmp_path / "not_an_image.png"
        p.write_bytes(b"definitely not a PNG")
        with pytest.raises(Exception):
            load_image(p)


class TestMasks:
    def test_center_mask_sums(self):
        assert make_center_mask(128).values.sum() == 16384
        assert (make_center_mask(256).values == 1).all()
        assert make_center_mask(0).values.sum() == 0

    def test_center_mask_is_centered(self):
        m = make_center_mask(128).values
        assert (m[64:192, 64:192] == 1).all()
        assert m.sum() == 128 * 128

    def test_random_square_within_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = make_random_square_mask(128, rng).values
            assert m.sum() == 16384
            rows = np.flatnonzero(m.any(axis=1))
            cols = np.flatnonzero(m.any(axis=0))
            assert rows[-1] - rows[0] == 127 and cols[-1] - cols[0] == 127

    def test_random_square_deterministic_under_seed(self):
        a = make_random_square_mask(64, np.random.default_rng(7)).values
        b = make_random_square_mask(64, np.random.default_rng(7)).values
        np.testing.assert_array_equal(a, b)

    def test_random_square_too_large_rejected(self):
        with pytest.raises(ValueError):
            make_random_square_mask(512, np.random.default_rng(0))

    def test_offset_distribution_uniform(self):
        """Coarse-binned offset histogram within 3 sigma of multinomial."""
        rng = np.random.default_rng(123)
        n_draws, bins = 10_000, 8
        valid = 256 - 128 + 1  # 129 offsets per axis
        counts = np.zeros((bins, bins))
        for _ in range(n_draws):
            m = make_random_square_mask(128, rng).values
            top = np.flatnonzero(m.any(axis=1))[0]
            left = np.flatnonzero(m.any(axis=0))[0]
            counts[top * bins // valid, left * bins // valid] += 1
        # bin widths differ by at most one offset; use exact per-bin expectation
        edges = [(b * valid + bins - 1) // bins for b in range(bins + 1)]
        for bi in range(bins):
            for bj in range(bins):
                p = ((edges[bi + 1] - edges[bi]) / valid) * ((edges[bj + 1] - edges[bj]) / valid)
                mean, sd = n_draws * p, np.sqrt(n_draws * p * (1 - p))
                assert abs(counts[bi, bj] - mean) < 3.5 * sd

    def test_irregular_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        mask = BinaryMask((rng.random((256, 256)) < 0.5).astype(np.float64))
        p = tmp_path / "mask.png"
        save_mask(mask, p)
        back = load_irregular_mask(p)
        np.testing.assert_array_equal(back.values, mask.values)

    def test_irregular_constant_files(self, tmp_path):
        white, black = tmp_path / "w.png", tmp_path / "b.png"
        Image.fromarray(np.full((64, 64), 255, dtype=np.uint8), "L").save(white)
        Image.fromarray(np.zeros((64, 64), dtype=np.uint8), "L").save(black)
        assert (load_irregular_mask(white).values == 1).all()
        assert (load_irregular_mask(black).values == 0).all()

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MaskSpec(kind="blob")
        with pytest.raises(ValueError):
            MaskSpec(size=300)
        with pytest.raises(ValueError):
            MaskSpec(kind="irregular_file")


class TestBatches:
    def _manifest(self, paths):
        entries = [(p, "train" if i < 6 else "test") for i, p in enumerate(paths)]
        return DatasetManifest(entries, name="toy")

    def test_manifest_round_trip(self, image_dir, tmp_path):
        _, paths = image_dir
        manifest = self._manifest(paths)
        f = tmp_path / "manifest.tsv"
        manifest.save(f)
        back = DatasetManifest.load(f)
        assert back.entries == manifest.entries
        assert back.counts == {"train": 6, "test": 2}

    def test_epoch_deterministic_under_seed(self, image_dir):
        _, paths = image_dir
        manifest = self._manifest(paths)
        spec = MaskSpec("random_square", 64)

        def run(seed):
            rng = np.random.default_rng(seed)
            out = []
            for batch in epoch_batches(manifest, spec, 2, rng):
                out.append((tuple(batch.ids), batch.images.tobytes(), batch.masks[0].tobytes()))
            return out

        assert run(5) == run(5)
        assert run(5) != run(6)

    def test_epoch_covers_all_without_replacement(self, image_dir):
        _, paths = image_dir
        manifest = self._manifest(paths)
        rng = np.random.default_rng(0)
        seen = []
        for batch in epoch_batches(manifest, MaskSpec("center_square", 64), 4, rng):
            seen.extend(batch.ids)
        assert sorted(seen) == sorted(f"img_{i}" for i in range(6))

    def test_empty_manifest_rejected(self):
        manifest = DatasetManifest([], name="empty")
        with pytest.raises(ValueError):
            make_batch(manifest, MaskSpec(), 2, np.random.default_rng(0))

    def test_bad_file_skipped_with_warning(self, image_dir, tmp_path, caplog):
        _, paths = image_dir
        broken = tmp_path / "broken.png"
        broken.write_bytes(b"nope")
        manifest = DatasetManifest([(str(broken), "train"), (paths[0], "train")])
        with caplog.at_level("WARNING", logger="pennet"):
            batch = make_batch(manifest, MaskSpec(), 2, np.random.default_rng(0))
        assert "skipping unreadable" in caplog.text
        assert len(batch.ids) == 1


def test_quantization_is_symmetric():
    vals = np.linspace(-1, 1, 511)
    round_tripped = to_uint8(vals).astype(np.float64) / 255 * 2 - 1
    assert np.abs(round_tripped - vals).max() <= 1 / 255 + 1e-12
