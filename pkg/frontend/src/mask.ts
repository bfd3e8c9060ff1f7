/**
 * Binary mask layer and painting operations.
 *
 * The mask is a flat Uint8Array of 0/1 aligned with the image, 1 = hole
 * (the region to be inpainted). Brush strokes stamp disks along the
 * pointer path; rectangle mode fills the dragged box inclusive of both
 * corners. All operations return fresh layers so history snapshots can
 * share buffers safely.
 */

export type BrushMode = "paint" | "erase" | "rectangle";

export interface Brush {
  mode: BrushMode;
  radius: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface MaskLayer {
  width: number;
  height: number;
  data: Uint8Array;
}

export function createMask(width: number, height: number): MaskLayer {
  return { width, height, data: new Uint8Array(width * height) };
}

export function cloneMask(mask: MaskLayer): MaskLayer {
  return { width: mask.width, height: mask.height, data: mask.data.slice() };
}

export function holeCount(mask: MaskLayer): number {
  let n = 0;
  for (const v of mask.data) n += v;
  return n;
}

function stampDisk(mask: MaskLayer, cx: number, cy: number, radius: number, value: 0 | 1): void {
  const r = Math.max(0, radius);
  const x0 = Math.max(0, Math.floor(cx - r));
  const x1 = Math.min(mask.width - 1, Math.ceil(cx + r));
  const y0 = Math.max(0, Math.floor(cy - r));
  const y1 = Math.min(mask.height - 1, Math.ceil(cy + r));
  const r2 = r * r;
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) mask.data[y * mask.width + x] = value;
    }
  }
}

export function fillRectangle(mask: MaskLayer, a: Point, b: Point, value: 0 | 1 = 1): MaskLayer {
  const out = cloneMask(mask);
  const x0 = Math.max(0, Math.min(Math.round(a.x), Math.round(b.x)));
  const x1 = Math.min(mask.width - 1, Math.max(Math.round(a.x), Math.round(b.x)));
  const y0 = Math.max(0, Math.min(Math.round(a.y), Math.round(b.y)));
  const y1 = Math.min(mask.height - 1, Math.max(Math.round(a.y), Math.round(b.y)));
  for (let y = y0; y <= y1; y++) {
    out.data.fill(value, y * mask.width + x0, y * mask.width + x1 + 1);
  }
  return out;
}

/** Pixels within the brush radius of the polyline are set (paint) or cleared (erase). */
export function paintStroke(mask: MaskLayer, path: Point[], brush: Brush): MaskLayer {
  if (path.length === 0) return cloneMask(mask);
  if (brush.mode === "rectangle") {
    return fillRectangle(mask, path[0], path[path.length - 1], 1);
  }
  const value: 0 | 1 = brush.mode === "erase" ? 0 : 1;
  const out = cloneMask(mask);
  let prev = path[0];
  stampDisk(out, prev.x, prev.y, brush.radius, value);
  for (let i = 1; i < path.length; i++) {
    const cur = path[i];
    const dist = Math.hypot(cur.x - prev.x, cur.y - prev.y);
    const steps = Math.max(1, Math.ceil(dist * 2));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stampDisk(out, prev.x + (cur.x - prev.x) * t, prev.y + (cur.y - prev.y) * t, brush.radius, value);
    }
    prev = cur;
  }
  return out;
}

/** 8-bit grayscale export: hole = 255, context = 0 (the service threshold is >127). */
export function toGrayscale(mask: MaskLayer): Uint8Array {
  const out = new Uint8Array(mask.data.length);
  for (let i = 0; i < mask.data.length; i++) out[i] = mask.data[i] ? 255 : 0;
  return out;
}

export function fromGrayscale(width: number, height: number, gray: Uint8Array): MaskLayer {
  const mask = createMask(width, height);
  for (let i = 0; i < gray.length; i++) mask.data[i] = gray[i] > 127 ? 1 : 0;
  return mask;
}
