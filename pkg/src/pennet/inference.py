"""Native-resolution inference on top of the fixed-resolution model.

Arbitrary-size inputs are resized to the model resolution (bilinear for
the image, nearest for the mask), inpainted, resized back, and then the
pixel select is re-applied at native resolution against the original
bytes: context pixels in the result are byte-identical to the decoded
input regardless of input size.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .data import to_uint8, to_unit_range
from .errors import ShapeError
from .model import Generator


def decode_image_bytes(data: bytes) -> np.ndarray:
    import io

    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))


def decode_mask_bytes(data: bytes) -> np.ndarray:
    import io

    with Image.open(io.BytesIO(data)) as im:
        return (np.asarray(im.convert("L")) > 127).astype(np.float64)


def encode_png(arr: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def inpaint_uint8(generator: Generator, image_u8: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Inpaint an (H, W, 3) uint8 image under an (H, W) binary mask."""
    if image_u8.ndim != 3 or image_u8.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {image_u8.shape}")
    if mask.shape != image_u8.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match image {image_u8.shape[:2]}")
    res = generator.cfg.resolution
    native = image_u8.shape[:2]

    if native != (res, res):
        img_model = np.asarray(
            Image.fromarray(image_u8).resize((res, res), Image.BILINEAR)
        )
        rows = (np.arange(res) * native[0]) // res
        cols = (np.arange(res) * native[1]) // res
        mask_model = mask[np.ix_(rows, cols)]
    else:
        img_model, mask_model = image_u8, mask

    pixels = to_unit_range(img_model).transpose(2, 0, 1)[None]
    _, z = generator.forward_t(pixels.astype(generator.cfg.np_dtype), [mask_model])
    result_u8 = to_uint8(z.data[0].transpose(1, 2, 0))

    if native != (res, res):
        result_u8 = np.asarray(
            Image.fromarray(result_u8).resize((native[1], native[0]), Image.BILINEAR)
        )
    # final select at native resolution: context bytes pass through exactly
    m3 = mask.astype(bool)[:, :, None]
    return np.where(m3, result_u8, image_u8)
