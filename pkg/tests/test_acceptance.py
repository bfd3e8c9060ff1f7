"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion. Tolerances are pinned in the assertions below.
"""

import base64
import functools
import io
import sys

import numpy as np
import pytest
from PIL import Image

from pennet import autodiff as ad
from pennet.attention import evolve_mask, region_affinity, attention_transfer
from pennet.autodiff import Tensor
from pennet.data import MaskSpec, make_center_mask
from pennet.losses import downscale_to, hinge_d, hinge_g, pyramid_l1, pyramid_l1_t, hinge_g_t, total_objective_t
from pennet.metrics import frechet_distance, inception_score, ms_ssim
from pennet.model import PenNet, PenNetConfig, compose_output
from pennet.train import TrainConfig, TrainState, fit, overfit_smoke, synthetic_images
from pennet.types import BinaryMask, ImageSample, MultiScaleOutputs

from oracles import affinity_oracle, transfer_oracle


def criterion(name):
    """Print one pass/fail line per acceptance criterion."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}", file=sys.stderr, flush=True)
                raise
            print(f"[PASS] {name}", flush=True)
            return result

        return wrapper

    return deco


def random_mask(rng, h, w, p=0.4):
    while True:
        m = (rng.random((h, w)) < p).astype(np.float64)
        if 0 < m.sum() < m.size:
            return m


@criterion("attention normalization: rows sum to 1 within 1e-5")
def test_attention_normalization():
    rng = np.random.default_rng(101)
    for size in (4, 8, 16):
        for _ in range(100):
            feature = rng.normal(size=(rng.integers(1, 5), size, size))
            mask = random_mask(rng, size, size, p=float(rng.uniform(0.1, 0.9)))
            scores = region_affinity(feature, mask)
            assert np.abs(scores.alpha.sum(axis=1) - 1.0).max() < 1e-5


@criterion("ATN oracle equivalence: conv formulation vs brute force < 1e-4")
def test_atn_oracle_equivalence():
    rng = np.random.default_rng(202)
    for trial in range(50):
        size = int(rng.choice([4, 8, 16]))
        channels = int(rng.integers(1, 5))
        low_channels = int(rng.integers(1, 5))
        high = rng.normal(size=(channels, size, size))
        mask_high = random_mask(rng, size, size)
        mask_low = np.repeat(np.repeat(mask_high, 2, 0), 2, 1)
        low = rng.normal(size=(low_channels, 2 * size, 2 * size))

        scores = region_affinity(high, mask_high)
        alpha_o, hole_o, ctx_o = affinity_oracle(high, mask_high)
        np.testing.assert_array_equal(scores.hole_indices, hole_o)
        assert np.abs(scores.alpha - alpha_o).max() < 1e-4

        got = attention_transfer(scores, low, mask_low)
        want = transfer_oracle(alpha_o, hole_o, ctx_o, low, mask_low, (size, size))
        assert np.abs(got - want).max() < 1e-4


@criterion("gradient check: analytic vs central differences, rel err <= 1e-3")
def test_gradient_check():
    cfg = TrainConfig(
        model=PenNetConfig.mini(resolution=32, dtype="float64", seed=7),
        lambda_g=0.01,
        lambda_pd=1.0,
        mask=MaskSpec("center_square", 16),
    )
    state = TrainState.fresh(cfg)
    gen, disc = state.model.generator, state.model.discriminator
    rng = np.random.default_rng(33)
    images = synthetic_images(1, 32, seed=4)
    mask = random_mask(rng, 32, 32, p=0.35)

    def loss_value() -> float:
        outputs, z = gen.forward_t(images, [mask])
        logits = disc.forward_t(z, n_power_iter=3, update_u=False)
        total = total_objective_t(
            hinge_g_t(logits), pyramid_l1_t(outputs, images), cfg.lambda_g, cfg.lambda_pd
        )
        return total, float(total.data)

    for p in disc.parameters():
        p.requires_grad = False
    total, _ = loss_value()
    gen.zero_grad()
    total.backward()

    params = list(gen.named_parameters())
    h = 1e-5
    checked = 0
    worst = 0.0
    while checked < 220:
        name, p = params[int(rng.integers(0, len(params)))]
        idx = np.unravel_index(int(rng.integers(0, p.data.size)), p.data.shape)
        analytic = float(p.grad[idx])
        orig = p.data[idx]
        p.data[idx] = orig + h
        _, fp = loss_value()
        p.data[idx] = orig - h
        _, fm = loss_value()
        p.data[idx] = orig
        fd = (fp - fm) / (2 * h)
        err = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
        worst = max(worst, err)
        assert err <= 1e-3, f"{name}{idx}: analytic {analytic:.3e} fd {fd:.3e} rel {err:.2e}"
        checked += 1
    print(f"  checked {checked} coordinates, worst rel err {worst:.2e}")


@criterion("composition exactness: context equal under Eq-select and HTTP codec")
def test_composition_exactness():
    rng = np.random.default_rng(404)
    for _ in range(100):
        size = int(rng.choice([16, 32, 64]))
        x = ImageSample(rng.uniform(-1, 1, size=(size, size, 3)))
        pred = rng.uniform(-1, 1, size=(size, size, 3))
        mask = (rng.random((size, size)) < rng.uniform(0.1, 0.9)).astype(np.float64)
        z = compose_output(pred, x, BinaryMask(mask))
        keep = mask == 0
        assert (z.pixels[keep] == x.pixels[keep]).all()

    # through the HTTP service with PNG round trip
    from fastapi.testclient import TestClient

    from pennet.serve import create_app
    from pennet.train import save_checkpoint
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        ck = Path(td) / "ck.pennet"
        save_checkpoint(
            TrainState.fresh(
                TrainConfig(model=PenNetConfig.mini(resolution=64, seed=1))
            ),
            ck,
        )
        client = TestClient(create_app(ck))
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        mask = random_mask(rng, 64, 64)
        buf_i, buf_m = io.BytesIO(), io.BytesIO()
        Image.fromarray(img).save(buf_i, format="PNG")
        Image.fromarray((mask * 255).astype(np.uint8), "L").save(buf_m, format="PNG")
        r = client.post(
            "/inpaint",
            json={
                "image_b64": base64.b64encode(buf_i.getvalue()).decode(),
                "mask_b64": base64.b64encode(buf_m.getvalue()).decode(),
            },
        )
        assert r.status_code == 200
        out = np.asarray(
            Image.open(io.BytesIO(base64.b64decode(r.json()["result_b64"]))).convert("RGB")
        )
        keep = mask == 0
        diff = np.abs(out[keep].astype(int) - img[keep].astype(int))
        assert diff.max() <= 1


@criterion("shape suite: full 256 forward matches the published schedule")
def test_shape_suite():
    model = PenNet(PenNetConfig.full(seed=0))
    rng = np.random.default_rng(55)
    image = ImageSample(rng.uniform(-1, 1, size=(256, 256, 3)))
    mask = BinaryMask(make_center_mask(128, 256).values)

    phi = model.generator.encode(image, mask)
    widths = (16, 32, 64, 128, 256, 256, 256)
    sizes = (256, 128, 64, 32, 16, 8, 4)
    assert len(phi.phi) == 7
    for level in range(1, 8):
        assert phi.phi[level - 1].shape == (widths[level - 1], sizes[level - 1], sizes[level - 1])

    pyr = evolve_mask(mask.values, 7)
    psi = model.generator.fill_pyramid(phi, pyr)
    assert len(psi.psi) == 6
    for p, f in zip(psi.psi, phi.phi):
        assert p.shape == f.shape

    outs = model.generator.decode(phi.phi[-1], psi)
    assert [o.shape for o in outs.outputs] == [(s, s, 3) for s in (8, 16, 32, 64, 128, 256)]

    logits = model.discriminator.discriminate(image)
    assert logits.values.shape == (16, 16)


@criterion("spectral norm: top singular value in [0.99, 1.01]")
def test_spectral_norm():
    model = PenNet(PenNetConfig.full(seed=12))
    for conv in model.discriminator.convs:
        wn = conv.normalized_weight(n_power_iter=20, update_u=False, converge_tol=1e-12)
        top = np.linalg.svd(wn.data.reshape(wn.data.shape[0], -1), compute_uv=False)[0]
        assert 0.99 <= top <= 1.01


@criterion("hinge fixed points: d(1,-1)=0, d(0,0)=2, g(0.5)=-0.5 exactly")
def test_hinge_fixed_points():
    assert hinge_d(np.array(1.0), np.array(-1.0)) == 0.0
    assert hinge_d(np.array(0.0), np.array(0.0)) == 2.0
    assert hinge_g(np.array(0.5)) == -0.5


@criterion("pyramid loss: zero iff every scale matches downscaled truth")
def test_pyramid_loss_zero():
    rng = np.random.default_rng(77)
    gt = ImageSample(rng.uniform(-1, 1, size=(64, 64, 3)))
    chw = gt.pixels.transpose(2, 0, 1)
    outs = MultiScaleOutputs(
        [downscale_to(chw, s).transpose(1, 2, 0) for s in (8, 16, 32, 64)]
    )
    assert pyramid_l1(outs, gt) == 0.0
    outs.outputs[1] = outs.outputs[1] + 1e-4
    assert pyramid_l1(outs, gt) > 0.0


@criterion("overfit smoke: masked MAE halves within 500 steps, losses finite")
def test_overfit_smoke(tmp_path):
    report = overfit_smoke(tmp_path / "smoke", steps=500, n_images=8, mask_size=64,
                           resolution=128, batch_size=4, seed=0)
    print(
        f"  masked MAE {report['step0_masked_mae']:.4f} -> "
        f"{report['final_masked_mae']:.4f} (ratio {report['ratio']:.3f})"
    )
    assert report["losses_finite"]
    assert report["ratio"] <= 0.5


@criterion("metric self-tests: ms_ssim, inception score, frechet distance")
def test_metric_self_tests():
    rng = np.random.default_rng(88)
    x = ImageSample(rng.uniform(-1, 1, size=(256, 256, 3)))
    assert abs(ms_ssim(x, x) - 1.0) < 1e-6

    class ConstantProvider:
        def classify(self, images):
            return np.tile([0.25, 0.25, 0.5], (len(images), 1))

    class DisjointProvider:
        def classify(self, images):
            out = np.zeros((len(images), 2))
            out[::2, 0] = 1.0
            out[1::2, 1] = 1.0
            return out

    imgs = np.zeros((4, 8, 8, 3))
    assert abs(inception_score(imgs, ConstantProvider()) - 1.0) < 1e-12
    assert abs(inception_score(imgs, DisjointProvider()) - 2.0) < 1e-12

    e = rng.normal(size=(96, 5))
    assert frechet_distance(e, e.copy()) < 1e-4
    v = np.array([0.5, -1.0, 2.0, 0.0, 1.5])
    assert abs(frechet_distance(e, e + v) - float(v @ v)) < 1e-6


@criterion("determinism: bitwise-equal forwards and 100-step loss traces")
def test_determinism():
    def forward_bytes():
        model = PenNet(PenNetConfig.mini(resolution=64, seed=13))
        rng = np.random.default_rng(14)
        image = ImageSample(rng.uniform(-1, 1, size=(64, 64, 3)))
        mask = BinaryMask(make_center_mask(32, 64).values)
        outs, z = model.generator.generator_forward(image, mask)
        return z.pixels.tobytes() + b"".join(o.tobytes() for o in outs.outputs)

    assert forward_bytes() == forward_bytes()

    def trace():
        cfg = TrainConfig(
            model=PenNetConfig.mini(resolution=32, seed=15),
            batch_size=2,
            max_steps=100,
            mask=MaskSpec("center_square", 16),
        )
        state = TrainState.fresh(cfg)
        images = synthetic_images(4, 32, seed=16).astype(np.float32)
        mask = make_center_mask(16, 32).values

        from pennet.data import Batch

        def batches():
            rng = np.random.default_rng(17)
            while True:
                pick = rng.permutation(4)[:2]
                yield Batch(images=images[pick], masks=[mask.copy(), mask.copy()], ids=[])

        return [
            (r["d"], r["g_adv"], r["pyramid"]) for r in fit(state, batches(), max_steps=100)
        ]

    assert trace() == trace()
