/**
 * Editor session: base image, mask layer, last inpaint result, and an
 * undo history of (image, mask, result) snapshots. Every mutating
 * operation pushes the prior state, so undo restores any earlier point.
 */

import { cloneImage, RgbaImage } from "./image.js";
import {
  Brush,
  cloneMask,
  createMask,
  MaskLayer,
  paintStroke,
  Point,
} from "./mask.js";

export interface Snapshot {
  base: RgbaImage;
  mask: MaskLayer;
  result: RgbaImage | null;
}

export class EditorSession {
  base: RgbaImage;
  mask: MaskLayer;
  result: RgbaImage | null = null;
  brush: Brush = { mode: "paint", radius: 12 };
  private history: Snapshot[] = [];

  constructor(base: RgbaImage) {
    this.base = base;
    this.mask = createMask(base.width, base.height);
  }

  private snapshot(): void {
    this.history.push({
      base: cloneImage(this.base),
      mask: cloneMask(this.mask),
      result: this.result ? cloneImage(this.result) : null,
    });
  }

  get historyDepth(): number {
    return this.history.length;
  }

  applyStroke(path: Point[]): void {
    this.snapshot();
    this.mask = paintStroke(this.mask, path, this.brush);
  }

  // -- live painting: visual feedback during a drag, one history entry --

  private strokeBase: MaskLayer | null = null;

  beginLivePaint(): void {
    this.strokeBase = cloneMask(this.mask);
  }

  livePaint(path: Point[]): void {
    if (!this.strokeBase) this.beginLivePaint();
    this.mask = paintStroke(this.strokeBase!, path, this.brush);
  }

  commitLivePaint(): void {
    if (!this.strokeBase) return;
    const finalMask = this.mask;
    this.mask = this.strokeBase;
    this.strokeBase = null;
    this.snapshot();
    this.mask = finalMask;
  }

  clearMask(): void {
    this.snapshot();
    this.mask = createMask(this.base.width, this.base.height);
  }

  setResult(result: RgbaImage): void {
    if (result.width !== this.base.width || result.height !== this.base.height) {
      throw new Error(
        `result ${result.width}x${result.height} does not match base ` +
          `${this.base.width}x${this.base.height}`,
      );
    }
    this.snapshot();
    this.result = result;
  }

  /** The inpainted image becomes the new base; the mask is cleared. */
  adoptResult(): void {
    if (!this.result) throw new Error("no result to adopt");
    this.snapshot();
    this.base = this.result;
    this.result = null;
    this.mask = createMask(this.base.width, this.base.height);
  }

  undo(): boolean {
    const prev = this.history.pop();
    if (!prev) return false;
    this.base = prev.base;
    this.mask = prev.mask;
    this.result = prev.result;
    return true;
  }
}
