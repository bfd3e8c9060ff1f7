/**
 * DOM wiring for the mask editor.
 *
 * Layout: an editor canvas showing the base image with a checkerboard
 * overlay where the mask is set (thin strokes stay visible), a result
 * panel beside it, brush controls, and the action row (inpaint, adopt,
 * undo, export). Service errors surface as a dismissible notice; the
 * session itself never changes on a failed request. Only one inpaint
 * request is in flight at a time; the newest click wins.
 */

import { InpaintClient, SingleFlight } from "./api.js";
import { browserCodec } from "./codec_browser.js";
import { RgbaImage } from "./image.js";
import { BrushMode, Point, toGrayscale } from "./mask.js";
import { EditorSession } from "./session.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8080";

const els = {
  file: document.getElementById("file") as HTMLInputElement,
  editor: document.getElementById("editor") as HTMLCanvasElement,
  result: document.getElementById("result") as HTMLCanvasElement,
  mode: document.getElementById("mode") as HTMLSelectElement,
  radius: document.getElementById("radius") as HTMLInputElement,
  inpaint: document.getElementById("inpaint") as HTMLButtonElement,
  adopt: document.getElementById("adopt") as HTMLButtonElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  clear: document.getElementById("clear") as HTMLButtonElement,
  exportMask: document.getElementById("export-mask") as HTMLButtonElement,
  exportResult: document.getElementById("export-result") as HTMLButtonElement,
  notice: document.getElementById("notice") as HTMLDivElement,
  status: document.getElementById("status") as HTMLSpanElement,
};

const client = new InpaintClient(SERVICE_URL, browserCodec);
const queue = new SingleFlight<void>();
let session: EditorSession | null = null;
let stroke: Point[] = [];
let pointerDown = false;

function notice(text: string, isError = false): void {
  els.notice.textContent = text;
  els.notice.className = isError ? "notice error" : "notice";
  els.notice.hidden = !text;
}

function drawChecker(ctx: CanvasRenderingContext2D, session: EditorSession): void {
  const { width, height } = session.mask;
  const cell = 6;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (!session.mask.data[y * width + x]) continue;
      const odd = (Math.floor(x / cell) + Math.floor(y / cell)) % 2 === 1;
      ctx.fillStyle = odd ? "rgba(255,255,255,0.75)" : "rgba(60,60,60,0.75)";
      ctx.fillRect(x, y, 1, 1);
    }
  }
}

function render(): void {
  if (!session) return;
  const { base } = session;
  els.editor.width = base.width;
  els.editor.height = base.height;
  const ctx = els.editor.getContext("2d")!;
  ctx.putImageData(new ImageData(base.data, base.width, base.height), 0, 0);
  drawChecker(ctx, session);
  if (stroke.length > 1 && session.brush.mode === "rectangle") {
    const a = stroke[0];
    const b = stroke[stroke.length - 1];
    ctx.strokeStyle = "#ff5050";
    ctx.strokeRect(Math.min(a.x, b.x), Math.min(a.y, b.y), Math.abs(b.x - a.x), Math.abs(b.y - a.y));
  }
  if (session.result) {
    els.result.width = session.result.width;
    els.result.height = session.result.height;
    els.result
      .getContext("2d")!
      .putImageData(new ImageData(session.result.data, session.result.width, session.result.height), 0, 0);
  } else {
    els.result.getContext("2d")!.clearRect(0, 0, els.result.width, els.result.height);
  }
  els.adopt.disabled = !session.result;
}

function canvasPoint(ev: PointerEvent): Point {
  const rect = els.editor.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * els.editor.width,
    y: ((ev.clientY - rect.top) / rect.height) * els.editor.height,
  };
}

els.file.addEventListener("change", async () => {
  const file = els.file.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  const image: RgbaImage = await browserCodec.decodeRgba(bytes);
  session = new EditorSession(image);
  notice("");
  render();
});

els.mode.addEventListener("change", () => {
  if (session) session.brush.mode = els.mode.value as BrushMode;
});
els.radius.addEventListener("input", () => {
  if (session) session.brush.radius = Number(els.radius.value);
});

els.editor.addEventListener("pointerdown", (ev) => {
  if (!session) return;
  pointerDown = true;
  els.editor.setPointerCapture(ev.pointerId);
  stroke = [canvasPoint(ev)];
  if (session.brush.mode !== "rectangle") session.beginLivePaint();
});
els.editor.addEventListener("pointermove", (ev) => {
  if (!pointerDown || !session) return;
  stroke.push(canvasPoint(ev));
  if (session.brush.mode !== "rectangle") {
    // live feedback during the drag; history gets one entry per stroke
    session.livePaint(stroke);
  }
  render();
});
els.editor.addEventListener("pointerup", () => {
  if (!pointerDown || !session) return;
  pointerDown = false;
  if (session.brush.mode === "rectangle") {
    session.applyStroke(stroke);
  } else {
    session.livePaint(stroke);
    session.commitLivePaint();
  }
  stroke = [];
  render();
});

els.undo.addEventListener("click", () => {
  session?.undo();
  render();
});
els.clear.addEventListener("click", () => {
  session?.clearMask();
  render();
});

els.inpaint.addEventListener("click", () => {
  if (!session) return;
  const snapshotBase = session.base;
  const snapshotMask = session.mask;
  els.status.textContent = "inpainting…";
  void queue.submit(async () => {
    const outcome = await client.inpaint(snapshotBase, snapshotMask);
    if (session && session.base === snapshotBase) {
      session.setResult(outcome.image);
      els.status.textContent = `${outcome.modelId} · ${outcome.latencyMs.toFixed(0)} ms`;
      notice("");
      render();
    }
  }).then(
    (done) => {
      if (done === null) els.status.textContent = "superseded by a newer request";
    },
    (err: unknown) => {
      els.status.textContent = "";
      notice(`${err instanceof Error ? err.message : err}; click Inpaint to retry`, true);
    },
  );
});

els.adopt.addEventListener("click", () => {
  session?.adoptResult();
  render();
});

function download(name: string, bytes: Uint8Array): void {
  const blob = new Blob([bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength) as ArrayBuffer], { type: "image/png" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

els.exportMask.addEventListener("click", async () => {
  if (!session) return;
  const { width, height } = session.mask;
  download("mask.png", await browserCodec.encodeGray(width, height, toGrayscale(session.mask)));
});
els.exportResult.addEventListener("click", async () => {
  if (!session?.result) return;
  download("result.png", await browserCodec.encodeRgba(session.result));
});

void client
  .health()
  .then((h) => {
    els.status.textContent = h.ready ? `service ready (${h.modelId})` : "service not ready";
  })
  .catch(() => notice(`service unreachable at ${SERVICE_URL}`, true));
