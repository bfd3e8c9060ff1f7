/**
 * Client for the inpainting service (POST /inpaint, GET /healthz only).
 *
 * Payloads travel as JSON with base64 PNG fields, the service's lossless
 * transport. Raster encode/decode is injected so the same client runs in
 * the browser (canvas codec) and under node tests (pngjs codec).
 */

import { RgbaImage } from "./image.js";
import { MaskLayer, toGrayscale } from "./mask.js";

export interface RasterCodec {
  encodeRgba(image: RgbaImage): Promise<Uint8Array>;
  encodeGray(width: number, height: number, gray: Uint8Array): Promise<Uint8Array>;
  decodeRgba(bytes: Uint8Array): Promise<RgbaImage>;
}

export interface InpaintOutcome {
  image: RgbaImage;
  latencyMs: number;
  modelId: string;
}

export interface Health {
  ready: boolean;
  modelId: string;
}

// node's Buffer when present (tests); browsers take the btoa/atob path
interface NodeBufferCtor {
  from(input: Uint8Array): { toString(encoding: "base64"): string };
  from(input: string, encoding: "base64"): Uint8Array;
}
const nodeBuffer = (globalThis as Record<string, unknown>).Buffer as
  | NodeBufferCtor
  | undefined;

export function bytesToBase64(bytes: Uint8Array): string {
  if (nodeBuffer) {
    return nodeBuffer.from(bytes).toString("base64");
  }
  let bin = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    bin += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(bin);
}

export function base64ToBytes(b64: string): Uint8Array {
  if (nodeBuffer) {
    return new Uint8Array(nodeBuffer.from(b64, "base64"));
  }
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

export class InpaintClient {
  constructor(
    private baseUrl: string,
    private codec: RasterCodec,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async health(): Promise<Health> {
    const res = await this.fetchFn(`${this.baseUrl}/healthz`);
    const body = (await res.json()) as { ready: boolean; model_id: string };
    return { ready: body.ready, modelId: body.model_id };
  }

  async inpaint(image: RgbaImage, mask: MaskLayer): Promise<InpaintOutcome> {
    if (mask.width !== image.width || mask.height !== image.height) {
      throw new Error("mask is not aligned with the image");
    }
    const imageBytes = await this.codec.encodeRgba(image);
    const maskBytes = await this.codec.encodeGray(mask.width, mask.height, toGrayscale(mask));
    const res = await this.fetchFn(`${this.baseUrl}/inpaint`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        image_b64: bytesToBase64(imageBytes),
        mask_b64: bytesToBase64(maskBytes),
      }),
    });
    if (!res.ok) {
      let detail = `${res.status}`;
      try {
        const body = (await res.json()) as { error?: string };
        if (body.error) detail = `${res.status}: ${body.error}`;
      } catch {
        // plain-status detail is enough
      }
      throw new Error(`inpaint failed (${detail})`);
    }
    const body = (await res.json()) as {
      result_b64: string;
      latency_ms: number;
      model_id: string;
    };
    return {
      image: await this.codec.decodeRgba(base64ToBytes(body.result_b64)),
      latencyMs: body.latency_ms,
      modelId: body.model_id,
    };
  }
}

/**
 * At most one request in flight; while busy, the newest submission waits
 * as "pending" and any submission it displaces is cancelled.
 */
export class SingleFlight<T> {
  private inflight: Promise<void> | null = null;
  private pending: { job: () => Promise<T>; resolve: (v: T | null) => void } | null = null;

  /** Resolves null when a newer submission displaced this one. */
  submit(job: () => Promise<T>): Promise<T | null> {
    return new Promise<T | null>((resolve, reject) => {
      if (this.inflight) {
        if (this.pending) this.pending.resolve(null);
        this.pending = { job, resolve };
        return;
      }
      this.run(job).then(resolve, reject);
    });
  }

  private async run(job: () => Promise<T>): Promise<T> {
    let release!: () => void;
    this.inflight = new Promise<void>((r) => (release = r));
    try {
      return await job();
    } finally {
      release();
      this.inflight = null;
      const next = this.pending;
      this.pending = null;
      if (next) {
        this.run(next.job).then(next.resolve, () => next.resolve(null));
      }
    }
  }

  get busy(): boolean {
    return this.inflight !== null;
  }
}
