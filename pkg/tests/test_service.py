"""HTTP service checks through the ASGI test client."""

import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from pennet.data import MaskSpec
from pennet.model import PenNetConfig
from pennet.serve import create_app
from pennet.train import TrainConfig, TrainState, save_checkpoint


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "serve.pennet"
    cfg = TrainConfig(
        model=PenNetConfig.mini(resolution=64, seed=5),
        mask=MaskSpec("center_square", 32),
    )
    save_checkpoint(TrainState.fresh(cfg), path)
    return path


@pytest.fixture(scope="module")
def client(checkpoint):
    return TestClient(create_app(checkpoint))


def png_bytes(arr, mode="RGB"):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def random_png(rng, h, w):
    return png_bytes(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def mask_png(mask):
    return png_bytes((mask * 255).astype(np.uint8), mode="L")


def post_json(client, image_bytes, mask_bytes):
    return client.post(
        "/inpaint",
        json={
            "image_b64": base64.b64encode(image_bytes).decode(),
            "mask_b64": base64.b64encode(mask_bytes).decode(),
        },
    )


def result_array(response):
    data = base64.b64decode(response.json()["result_b64"])
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))


class TestHealth:
    def test_unready_before_checkpoint(self):
        app = create_app(None)
        unready = TestClient(app)
        r = unready.get("/healthz")
        assert r.status_code == 503
        assert r.json()["ready"] is False

    def test_inpaint_before_checkpoint_is_503(self):
        unready = TestClient(create_app(None))
        rng = np.random.default_rng(0)
        r = post_json(unready, random_png(rng, 64, 64), mask_png(np.zeros((64, 64))))
        assert r.status_code == 503

    def test_ready_after_checkpoint(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200
        body = r.json()
        assert body["ready"] is True
        assert "@step" in body["model_id"]


class TestInpaint:
    def test_context_pixels_byte_exact(self, client):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        mask = np.zeros((64, 64))
        mask[20:40, 20:40] = 1
        r = post_json(client, png_bytes(img), mask_png(mask))
        assert r.status_code == 200
        out = result_array(r)
        keep = mask == 0
        np.testing.assert_array_equal(out[keep], img[keep])
        body = r.json()
        assert body["latency_ms"] > 0
        assert "@step" in body["model_id"]

    def test_all_zero_mask_returns_input_exactly(self, client):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        r = post_json(client, png_bytes(img), mask_png(np.zeros((64, 64))))
        np.testing.assert_array_equal(result_array(r), img)

    def test_all_ones_mask_is_pure_generation(self, client, checkpoint):
        from pennet.inference import inpaint_uint8
        from pennet.train import load_checkpoint

        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        mask = np.ones((64, 64))
        r = post_json(client, png_bytes(img), mask_png(mask))
        generator = load_checkpoint(checkpoint).model.generator
        want = inpaint_uint8(generator, img, mask)
        np.testing.assert_array_equal(result_array(r), want)

    def test_identical_requests_identical_bytes(self, client):
        rng = np.random.default_rng(4)
        img = random_png(rng, 64, 64)
        mask = mask_png((np.random.default_rng(5).random((64, 64)) < 0.3).astype(np.float64))
        r1 = post_json(client, img, mask)
        r2 = post_json(client, img, mask)
        assert r1.json()["result_b64"] == r2.json()["result_b64"]

    def test_non_native_size_resized_and_context_kept(self, client):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, size=(100, 80, 3), dtype=np.uint8)
        mask = np.zeros((100, 80))
        mask[30:60, 20:50] = 1
        r = post_json(client, png_bytes(img), mask_png(mask))
        assert r.status_code == 200
        out = result_array(r)
        assert out.shape == img.shape
        keep = mask == 0
        np.testing.assert_array_equal(out[keep], img[keep])

    def test_dimension_mismatch_is_400(self, client):
        rng = np.random.default_rng(7)
        r = post_json(client, random_png(rng, 64, 64), mask_png(np.zeros((32, 32))))
        assert r.status_code == 400
        assert "does not match" in r.json()["error"]

    def test_multipart_upload(self, client):
        rng = np.random.default_rng(8)
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        mask = np.zeros((64, 64))
        r = client.post(
            "/inpaint",
            files={
                "image": ("img.png", png_bytes(img), "image/png"),
                "mask": ("mask.png", mask_png(mask), "image/png"),
            },
        )
        assert r.status_code == 200
        np.testing.assert_array_equal(result_array(r), img)

    def test_garbage_payload_is_400(self, client):
        r = client.post(
            "/inpaint", json={"image_b64": "!!!not base64!!!", "mask_b64": ""}
        )
        assert r.status_code == 400

    def test_checkpoint_id_verified_when_present(self, client):
        rng = np.random.default_rng(9)
        img = random_png(rng, 64, 64)
        mask = mask_png(np.zeros((64, 64)))
        model_id = client.get("/healthz").json()["model_id"]
        ok = client.post(
            "/inpaint",
            json={
                "image_b64": base64.b64encode(img).decode(),
                "mask_b64": base64.b64encode(mask).decode(),
                "checkpoint_id": model_id,
            },
        )
        assert ok.status_code == 200
        bad = client.post(
            "/inpaint",
            json={
                "image_b64": base64.b64encode(img).decode(),
                "mask_b64": base64.b64encode(mask).decode(),
                "checkpoint_id": "other-model@step9",
            },
        )
        assert bad.status_code == 400
        assert "not loaded" in bad.json()["error"]
