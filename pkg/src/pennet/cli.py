"""Command-line entry points: train, eval, infer, smoke, serve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("pennet")

MASK_KIND_BY_FLAG = {
    "center": "center_square",
    "random": "random_square",
    "irregular": "irregular_file",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pennet", description="pyramid-context inpainting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train from a JSON config")
    p_train.add_argument("--config", required=True, help="TrainConfig JSON file")
    p_train.add_argument("--manifest", required=True, help="dataset manifest (path<TAB>split)")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--resume", help="checkpoint to resume from")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--mask", choices=sorted(MASK_KIND_BY_FLAG), default="random")
    p_eval.add_argument("--size", type=int, choices=(32, 64, 128), default=128)
    p_eval.add_argument("--mask-path", help="irregular mask file or directory")
    p_eval.add_argument("--out", default="report.json")
    p_eval.add_argument("--seed", type=int, default=0)

    p_infer = sub.add_parser("infer", help="inpaint one image file")
    p_infer.add_argument("--image", required=True)
    p_infer.add_argument("--mask", required=True, help="8-bit grayscale mask, >127 = hole")
    p_infer.add_argument("--checkpoint", help="defaults to $PENNET_CHECKPOINT")
    p_infer.add_argument("--out", required=True)

    p_smoke = sub.add_parser("smoke", help="desk-scale overfit check on synthetic images")
    p_smoke.add_argument("--out", default="smoke_out")
    p_smoke.add_argument("--steps", type=int, default=500)
    p_smoke.add_argument("--images", type=int, default=8)
    p_smoke.add_argument("--mask-size", type=int, default=64)
    p_smoke.add_argument("--resolution", type=int, default=128)
    p_smoke.add_argument("--batch", type=int, default=4)
    p_smoke.add_argument("--seed", type=int, default=0)
    p_smoke.add_argument("--lr", type=float, default=1e-3)

    p_serve = sub.add_parser("serve", help="run the HTTP inference service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--checkpoint", help="defaults to $PENNET_CHECKPOINT")

    return parser


def cmd_train(args) -> int:
    from .data import DatasetManifest, epoch_batches
    from .train import TrainConfig, TrainState, fit, load_checkpoint, save_checkpoint

    cfg = TrainConfig.from_json(Path(args.config).read_text())
    manifest = DatasetManifest.load(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(args.resume) if args.resume else TrainState.fresh(cfg)

    def batches():
        epoch = 0
        while True:
            rng = np.random.default_rng((cfg.seed, epoch))
            yield from epoch_batches(
                manifest, cfg.mask, cfg.batch_size, rng, resolution=cfg.model.resolution
            )
            epoch += 1

    fit(state, batches(), cfg.max_steps, log_file=out / "train.log", checkpoint_dir=out)
    save_checkpoint(state, out / "final.pennet")
    log.info("trained to step %d; checkpoint at %s", state.step, out / "final.pennet")
    return 0


def cmd_eval(args) -> int:
    from .data import DatasetManifest, MaskSpec
    from .metrics import evaluate
    from .train import load_checkpoint

    kind = MASK_KIND_BY_FLAG[args.mask]
    if kind == "irregular_file" and not args.mask_path:
        raise SystemExit("--mask irregular requires --mask-path")
    spec = MaskSpec(kind=kind, size=args.size, source_path=args.mask_path)
    state = load_checkpoint(args.checkpoint)
    manifest = DatasetManifest.load(args.manifest)
    report = evaluate(
        manifest,
        state.model,
        spec,
        seed=args.seed,
        checkpoint_id=f"{Path(args.checkpoint).stem}@step{state.step}",
    )
    report.save(args.out)
    log.info(
        "evaluated %d images: L1 %.3f, MS-SSIM %.4f -> %s",
        len(report.records),
        report.aggregates["l1"],
        report.aggregates["ms_ssim"],
        args.out,
    )
    return 0


def cmd_infer(args) -> int:
    from PIL import Image

    from .inference import inpaint_uint8
    from .train import load_checkpoint

    ck = args.checkpoint or os.environ.get("PENNET_CHECKPOINT")
    if not ck:
        raise SystemExit("no checkpoint: pass --checkpoint or set PENNET_CHECKPOINT")
    state = load_checkpoint(ck)
    with Image.open(args.image) as im:
        image = np.asarray(im.convert("RGB"))
    with Image.open(args.mask) as im:
        mask = (np.asarray(im.convert("L")) > 127).astype(np.float64)
    result = inpaint_uint8(state.model.generator, image, mask)
    Image.fromarray(result).save(args.out)
    log.info("wrote %s", args.out)
    return 0


def cmd_smoke(args) -> int:
    from .train import overfit_smoke

    report = overfit_smoke(
        args.out,
        steps=args.steps,
        n_images=args.images,
        mask_size=args.mask_size,
        resolution=args.resolution,
        batch_size=args.batch,
        seed=args.seed,
        lr=args.lr,
    )
    print(json.dumps(report, indent=2))
    return 0


def cmd_serve(args) -> int:
    from .serve import serve

    serve(host=args.host, port=args.port, checkpoint=args.checkpoint)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "smoke": cmd_smoke,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - single-line diagnostic contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
