/** RGBA image buffer shared by the session, codecs and canvas layer. */

export interface RgbaImage {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>; // RGBA, length = 4 * width * height
}

export function createImage(width: number, height: number): RgbaImage {
  const data = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
  for (let i = 3; i < data.length; i += 4) data[i] = 255;
  return { width, height, data };
}

export function cloneImage(img: RgbaImage): RgbaImage {
  return { width: img.width, height: img.height, data: img.data.slice() };
}

/**
 * Maximum per-channel RGB deviation over pixels where the mask is 0.
 * Used to verify that context pixels survive the inpaint round trip.
 */
export function maxContextDeviation(
  a: RgbaImage,
  b: RgbaImage,
  mask: { data: Uint8Array },
): number {
  let worst = 0;
  const n = a.width * a.height;
  for (let p = 0; p < n; p++) {
    if (mask.data[p] !== 0) continue;
    for (let c = 0; c < 3; c++) {
      const d = Math.abs(a.data[p * 4 + c] - b.data[p * 4 + c]);
      if (d > worst) worst = d;
    }
  }
  return worst;
}
