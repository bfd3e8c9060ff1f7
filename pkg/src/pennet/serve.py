"""HTTP inference service.

POST /inpaint takes an image and a mask of equal dimensions, either as
multipart file fields (``image``, ``mask``) or as a JSON body with
base64 fields (``image_b64``, ``mask_b64``); it responds with JSON
``{"result_b64": <PNG>, "latency_ms": float, "model_id": str}``.
GET /healthz reports ``{"model_id", "ready"}`` and returns 503 until a
checkpoint is loaded. Masks are 8-bit grayscale, value > 127 = hole.
PNG is used throughout: context pixels in the result are byte-identical
to the uploaded image. Model parameters are read-only at serve time, so
concurrent requests are safe.
"""

from __future__ import annotations

import base64
import logging
import os
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .inference import decode_image_bytes, decode_mask_bytes, encode_png, inpaint_uint8

log = logging.getLogger("pennet")

CHECKPOINT_ENV = "PENNET_CHECKPOINT"


class ModelHolder:
    def __init__(self):
        self.generator = None
        self.model_id = ""

    def load(self, path: str | Path) -> None:
        from .train import load_checkpoint

        state = load_checkpoint(path)
        self.generator = state.model.generator
        self.model_id = f"{Path(path).stem}@step{state.step}"
        log.info("loaded checkpoint %s as %s", path, self.model_id)

    @property
    def ready(self) -> bool:
        return self.generator is not None


def create_app(checkpoint: str | Path | None = None) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="pennet-inpaint")
    # the mask editor is served as a static page from another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    holder = ModelHolder()
    app.state.holder = holder

    path = checkpoint or os.environ.get(CHECKPOINT_ENV)
    if path:
        holder.load(path)

    @app.get("/healthz")
    def healthz():
        body = {"model_id": holder.model_id, "ready": holder.ready}
        return JSONResponse(body, status_code=200 if holder.ready else 503)

    @app.post("/inpaint")
    async def inpaint(request: Request):
        if not holder.ready:
            return JSONResponse({"error": "model not loaded"}, status_code=503)
        t0 = time.perf_counter()
        content_type = request.headers.get("content-type", "")
        requested_model = None
        try:
            if content_type.startswith("multipart/form-data"):
                form = await request.form()
                if "image" not in form or "mask" not in form:
                    return JSONResponse(
                        {"error": "multipart fields 'image' and 'mask' required"}, 400
                    )
                image_bytes = await form["image"].read()
                mask_bytes = await form["mask"].read()
                requested_model = form.get("checkpoint_id")
            else:
                body = await request.json()
                image_bytes = base64.b64decode(body["image_b64"])
                mask_bytes = base64.b64decode(body["mask_b64"])
                requested_model = body.get("checkpoint_id")
        except Exception as exc:  # noqa: BLE001 - malformed payloads
            return JSONResponse({"error": f"bad request payload: {exc}"}, 400)
        if requested_model and requested_model != holder.model_id:
            return JSONResponse(
                {"error": f"checkpoint_id {requested_model!r} is not loaded "
                          f"(serving {holder.model_id!r})"},
                400,
            )

        try:
            image = decode_image_bytes(image_bytes)
            mask = decode_mask_bytes(mask_bytes)
        except Exception as exc:  # noqa: BLE001 - undecodable rasters
            return JSONResponse({"error": f"could not decode rasters: {exc}"}, 400)
        if mask.shape != image.shape[:2]:
            return JSONResponse(
                {
                    "error": f"mask {mask.shape} does not match image {image.shape[:2]}"
                },
                400,
            )

        result = inpaint_uint8(holder.generator, image, mask)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        log.info("inpaint %sx%s in %.1f ms", image.shape[0], image.shape[1], latency_ms)
        return JSONResponse(
            {
                "result_b64": base64.b64encode(encode_png(result)).decode(),
                "latency_ms": latency_ms,
                "model_id": holder.model_id,
            }
        )

    return app


def serve(host: str = "127.0.0.1", port: int = 8080, checkpoint: str | None = None) -> None:
    import uvicorn

    app = create_app(checkpoint)
    uvicorn.run(app, host=host, port=port, log_level="info")
