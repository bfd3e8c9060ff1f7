"""Alternating adversarial training, checkpointing, overfit smoke.

Each step: one discriminator update on (real, composed-with-frozen-
generator) pairs under the hinge loss, then one generator update on
weighted adversarial + per-scale reconstruction losses against the just-
updated discriminator. Spectral-norm power iteration advances once per
discriminator forward. Checkpoints are a single binary container:
``PENNET1`` magic, version byte, JSON header (config, step, tensor
table), then raw little-endian tensor payloads; reload is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Parameter, Tensor
from .data import Batch, MaskSpec, make_center_mask
from .errors import CheckpointError, ConfigError, NonFiniteLossError
from .losses import hinge_d_t, hinge_g_t, pyramid_l1_t, total_objective_t
from .model import PenNet, PenNetConfig
from .types import LossBundle

log = logging.getLogger("pennet")

MAGIC = b"PENNET1"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    model: PenNetConfig = field(default_factory=PenNetConfig)
    batch_size: int = 4
    lambda_g: float = 0.01
    lambda_pd: float = 1.0
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    max_steps: int = 10_000
    seed: int = 0
    checkpoint_interval: int = 1000
    mask: MaskSpec = field(default_factory=MaskSpec)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = PenNetConfig(**{**self.model, "widths": tuple(self.model["widths"]),
                                         "disc_widths": tuple(self.model["disc_widths"])})
        if isinstance(self.mask, dict):
            self.mask = MaskSpec(**self.mask)
        if self.lr <= 0 or self.lambda_g <= 0 or self.lambda_pd <= 0:
            raise ConfigError("learning rate and loss weights must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam moment coefficients must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()
        ).hexdigest()


class Adam:
    """Adaptive-moment optimizer over named parameters."""

    def __init__(self, named_params, lr, beta1=0.5, beta2=0.9, eps=1e-8):
        self.params: list[tuple[str, Parameter]] = list(named_params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1 - b1**self.t
        bias2 = 1 - b2**self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


@dataclass
class TrainState:
    cfg: TrainConfig
    model: PenNet
    g_opt: Adam
    d_opt: Adam
    step: int = 0

    @classmethod
    def fresh(cls, cfg: TrainConfig) -> "TrainState":
        model = PenNet(cfg.model)
        g_opt = Adam(model.generator.named_parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        d_opt = Adam(
            model.discriminator.named_parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps
        )
        return cls(cfg=cfg, model=model, g_opt=g_opt, d_opt=d_opt)


def train_step(state: TrainState, batch: Batch) -> LossBundle:
    cfg = state.cfg
    gen, disc = state.model.generator, state.model.discriminator
    dt = cfg.model.np_dtype
    real = batch.images.astype(dt)

    outputs, z = gen.forward_t(real, batch.masks)

    # discriminator update: generator outputs are constants here
    disc.zero_grad()
    d_real = disc.forward_t(Tensor(real), update_u=True)
    d_fake = disc.forward_t(Tensor(z.data.copy()), update_u=True)
    d_loss = hinge_d_t(d_real, d_fake)
    d_loss.backward()
    state.d_opt.step()

    # generator update against the updated discriminator
    for p in disc.parameters():
        p.requires_grad = False
    gen.zero_grad()
    d_fake2 = disc.forward_t(z, update_u=True)
    adv_g = hinge_g_t(d_fake2)
    pyr = pyramid_l1_t(outputs, real)
    total = total_objective_t(adv_g, pyr, cfg.lambda_g, cfg.lambda_pd)
    total.backward()
    state.g_opt.step()
    for p in disc.parameters():
        p.requires_grad = True

    state.step += 1
    losses = LossBundle(
        pyramid=float(pyr.data),
        adv_g=float(adv_g.data),
        adv_d=float(d_loss.data),
        lambda_g=cfg.lambda_g,
        lambda_pd=cfg.lambda_pd,
    )
    if not all(np.isfinite(v) for v in (losses.pyramid, losses.adv_g, losses.adv_d)):
        raise NonFiniteLossError(
            f"non-finite loss at step {state.step} on batch {batch.ids}: "
            f"d={losses.adv_d} g_adv={losses.adv_g} pyramid={losses.pyramid}"
        )
    return losses


def fit(
    state: TrainState,
    batches,
    max_steps: int,
    log_file: Path | None = None,
    checkpoint_dir: Path | None = None,
) -> list[dict]:
    """Run up to ``max_steps`` steps over an iterable of batches."""
    trace = []
    handle = open(log_file, "a") if log_file else None
    try:
        for batch in batches:
            if state.step >= max_steps:
                break
            t0 = time.perf_counter()
            losses = train_step(state, batch)
            wall = time.perf_counter() - t0
            rec = {
                "step": state.step,
                "d": losses.adv_d,
                "g_adv": losses.adv_g,
                "pyramid": losses.pyramid,
                "wall_s": wall,
            }
            trace.append(rec)
            line = (
                f"step={rec['step']} L_D={rec['d']:.6f} L_G_adv={rec['g_adv']:.6f} "
                f"L_pd={rec['pyramid']:.6f} wall_s={wall:.3f}"
            )
            log.info(line)
            if handle:
                handle.write(line + "\n")
            if (
                checkpoint_dir
                and state.cfg.checkpoint_interval > 0
                and state.step % state.cfg.checkpoint_interval == 0
            ):
                save_checkpoint(state, Path(checkpoint_dir) / f"step_{state.step:07d}.pennet")
    finally:
        if handle:
            handle.close()
    return trace


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def _named_arrays(state: TrainState) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for name, p in state.model.generator.named_parameters():
        arrays[f"g.param.{name}"] = p.data
    for name, p in state.model.discriminator.named_parameters():
        arrays[f"d.param.{name}"] = p.data
    for name, b in state.model.generator.named_buffers():
        arrays[f"g.buffer.{name}"] = b
    for name, b in state.model.discriminator.named_buffers():
        arrays[f"d.buffer.{name}"] = b
    for tag, opt in (("gopt", state.g_opt), ("dopt", state.d_opt)):
        for name, _ in opt.params:
            arrays[f"{tag}.m.{name}"] = opt.m[name]
            arrays[f"{tag}.v.{name}"] = opt.v[name]
    return arrays


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    arrays = _named_arrays(state)
    table = []
    offset = 0
    for name, arr in arrays.items():
        nbytes = arr.nbytes
        table.append(
            {
                "name": name,
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": nbytes,
            }
        )
        offset += nbytes
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "step": state.step,
            "g_opt_t": state.g_opt.t,
            "d_opt_t": state.d_opt.t,
            "config": json.loads(state.cfg.to_json()),
            "config_hash": state.cfg.digest(),
            "tensors": table,
        }
    ).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([FORMAT_VERSION]))
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        for arr in arrays.values():
            f.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path: str | Path) -> TrainState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a PENNET1 checkpoint (bad magic)")
    version = blob[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    head_start = len(MAGIC) + 1 + 8
    header_len = int.from_bytes(blob[len(MAGIC) + 1 : head_start], "little")
    header = json.loads(blob[head_start : head_start + header_len])
    payload = blob[head_start + header_len :]

    cfg = TrainConfig(**header["config"])
    if header.get("config_hash") and header["config_hash"] != cfg.digest():
        raise CheckpointError(f"{path}: config hash mismatch, file corrupt")
    state = TrainState.fresh(cfg)
    state.step = header["step"]
    state.g_opt.t = header["g_opt_t"]
    state.d_opt.t = header["d_opt_t"]

    arrays = {}
    for meta in header["tensors"]:
        raw = payload[meta["offset"] : meta["offset"] + meta["nbytes"]]
        arrays[meta["name"]] = np.frombuffer(raw, dtype=meta["dtype"]).reshape(meta["shape"]).copy()

    gen_params = dict(state.model.generator.named_parameters())
    disc_params = dict(state.model.discriminator.named_parameters())
    for name, arr in arrays.items():
        scope, kind, rest = name.split(".", 2)
        if kind == "param":
            target = gen_params[rest] if scope == "g" else disc_params[rest]
            if target.data.shape != arr.shape:
                raise CheckpointError(f"shape mismatch for {name}")
            target.data = arr
        elif kind == "buffer":
            module = state.model.generator if scope == "g" else state.model.discriminator
            module.set_buffer(rest, arr)
        elif kind in ("m", "v"):
            opt = state.g_opt if scope == "gopt" else state.d_opt
            getattr(opt, kind)[rest] = arr
    return state


# ---------------------------------------------------------------------------
# Overfit smoke
# ---------------------------------------------------------------------------


def synthetic_images(n: int, resolution: int, seed: int = 0) -> np.ndarray:
    """Deterministic smooth test images, (n, 3, H, W) in [-1, 1].

    Low-resolution noise bilinearly upsampled plus a color gradient:
    structured enough that masked-region errors are meaningful.
    """
    rng = np.random.default_rng(seed)
    imgs = np.zeros((n, 3, resolution, resolution))
    ramp = np.linspace(-0.6, 0.6, resolution)
    for i in range(n):
        for c in range(3):
            coarse = rng.uniform(-1, 1, size=(5, 5))
            fine = _bilinear_upsample(coarse, resolution)
            imgs[i, c] = 0.6 * fine + 0.25 * ramp[None, :] + 0.15 * ramp[:, None] * (-1) ** c
    return np.clip(imgs, -1, 1)


def _bilinear_upsample(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape
    ys = np.linspace(0, h - 1, size)
    xs = np.linspace(0, w - 1, size)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    return (
        img[np.ix_(y0, x0)] * (1 - wy) * (1 - wx)
        + img[np.ix_(y1, x0)] * wy * (1 - wx)
        + img[np.ix_(y0, x1)] * (1 - wy) * wx
        + img[np.ix_(y1, x1)] * wy * wx
    )


def masked_mae(state: TrainState, images: np.ndarray, masks: list[np.ndarray]) -> float:
    """Mean absolute error over hole pixels of the composed predictions."""
    gen = state.model.generator
    total, count = 0.0, 0
    for i in range(images.shape[0]):
        _, z = gen.forward_t(images[i : i + 1], [masks[i]])
        hole = masks[i] == 1
        diff = np.abs(z.data[0].transpose(1, 2, 0)[hole] - images[i].transpose(1, 2, 0)[hole])
        total += float(diff.sum())
        count += diff.size
    return total / max(count, 1)


def overfit_smoke(
    out_dir: str | Path,
    steps: int = 500,
    n_images: int = 8,
    mask_size: int = 64,
    resolution: int = 128,
    batch_size: int = 4,
    seed: int = 0,
    lr: float = 1e-3,
) -> dict:
    """Train the mini model on a handful of fixed images; report MAE drop.

    The learning rate defaults higher than the training default: this is
    a deliberate overfit of a few images, not a stability regime.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(
        model=PenNetConfig.mini(resolution=resolution, seed=seed),
        batch_size=batch_size,
        lr=lr,
        max_steps=steps,
        seed=seed,
        mask=MaskSpec("center_square", mask_size),
        checkpoint_interval=0,
    )
    state = TrainState.fresh(cfg)
    images = synthetic_images(n_images, resolution, seed=seed).astype(cfg.model.np_dtype)
    mask = make_center_mask(mask_size, resolution).values
    masks = [mask.copy() for _ in range(n_images)]

    mae0 = masked_mae(state, images, masks)

    def batches():
        rng = np.random.default_rng(cfg.seed + 1)
        while True:
            order = rng.permutation(n_images)
            for start in range(0, n_images, batch_size):
                pick = order[start : start + batch_size]
                yield Batch(
                    images=images[pick],
                    masks=[masks[i] for i in pick],
                    ids=[f"synthetic_{i}" for i in pick],
                )

    trace = fit(state, batches(), max_steps=steps, log_file=out_dir / "train.log")
    mae1 = masked_mae(state, images, masks)

    report = {
        "step0_masked_mae": mae0,
        "final_masked_mae": mae1,
        "ratio": mae1 / mae0 if mae0 > 0 else 0.0,
        "steps": state.step,
        "losses_finite": all(
            np.isfinite([r["d"], r["g_adv"], r["pyramid"]]).all() for r in trace
        ),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2))
    save_checkpoint(state, out_dir / "smoke.pennet")
    _write_smoke_artifacts(out_dir, state, images, masks, trace)
    log.info("smoke: masked MAE %.4f -> %.4f (ratio %.3f)", mae0, mae1, report["ratio"])
    return report


def _write_smoke_artifacts(out_dir, state, images, masks, trace):
    from .data import save_image

    gen = state.model.generator
    n = images.shape[0]
    panels = []
    for i in range(n):
        _, z = gen.forward_t(images[i : i + 1], [masks[i]])
        damaged = images[i] * (1 - masks[i][None])
        row = np.concatenate(
            [damaged.transpose(1, 2, 0), z.data[0].transpose(1, 2, 0), images[i].transpose(1, 2, 0)],
            axis=1,
        )
        panels.append(row)
    save_image(np.concatenate(panels, axis=0), out_dir / "composites.png")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        steps = [r["step"] for r in trace]
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(steps, [r["pyramid"] for r in trace], label="pyramid L1")
        ax.plot(steps, [r["d"] for r in trace], label="discriminator hinge")
        ax.plot(steps, [r["g_adv"] for r in trace], label="generator adv")
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "loss_curve.png", dpi=110)
        plt.close(fig)
    except Exception as exc:  # noqa: BLE001 - plotting is best-effort
        log.warning("could not write loss curve: %s", exc)
