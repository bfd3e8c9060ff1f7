/** Canvas-backed PNG codec for the browser build. */

import { RgbaImage } from "./image.js";
import { RasterCodec } from "./api.js";

async function canvasToPng(canvas: HTMLCanvasElement): Promise<Uint8Array> {
  const blob = await new Promise<Blob>((resolve, reject) => {
    canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("PNG encode failed"))), "image/png");
  });
  return new Uint8Array(await blob.arrayBuffer());
}

export const browserCodec: RasterCodec = {
  async encodeRgba(image: RgbaImage): Promise<Uint8Array> {
    const canvas = document.createElement("canvas");
    canvas.width = image.width;
    canvas.height = image.height;
    const ctx = canvas.getContext("2d")!;
    ctx.putImageData(new ImageData(image.data, image.width, image.height), 0, 0);
    return canvasToPng(canvas);
  },

  async encodeGray(width: number, height: number, gray: Uint8Array): Promise<Uint8Array> {
    // canvas has no grayscale mode; write equal RGB channels, the service
    // converts to 8-bit grayscale on decode
    const rgba = new Uint8ClampedArray(width * height * 4);
    for (let i = 0; i < gray.length; i++) {
      rgba[i * 4] = rgba[i * 4 + 1] = rgba[i * 4 + 2] = gray[i];
      rgba[i * 4 + 3] = 255;
    }
    const canvas = document.createElement("canvas");
    canvas.width = width;
    canvas.height = height;
    canvas.getContext("2d")!.putImageData(new ImageData(rgba, width, height), 0, 0);
    return canvasToPng(canvas);
  },

  async decodeRgba(bytes: Uint8Array): Promise<RgbaImage> {
    const blob = new Blob([bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength) as ArrayBuffer], { type: "image/png" });
    const bitmap = await createImageBitmap(blob);
    const canvas = document.createElement("canvas");
    canvas.width = bitmap.width;
    canvas.height = bitmap.height;
    const ctx = canvas.getContext("2d")!;
    ctx.drawImage(bitmap, 0, 0);
    const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
    return { width: bitmap.width, height: bitmap.height, data: data.data };
  },
};
