/**
 * Mask fidelity across the toolchain boundary: a mask exported by the
 * editor must decode identically through the Python pipeline's
 * grayscale-mask loader (the same format the CLI `infer` consumes).
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import { createMask, fillRectangle, fromGrayscale, holeCount, toGrayscale } from "../src/mask.js";
import { decodeGray, nodeCodec } from "./codec_node.js";

const tmp = mkdtempSync(join(tmpdir(), "pennet-mask-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

const PYTHON_ROUNDTRIP = `
import sys
import numpy as np
from pennet.data import load_irregular_mask, save_mask
mask = load_irregular_mask(sys.argv[1])
print(int(mask.values.sum()))
save_mask(mask, sys.argv[2])
`;

describe("exported masks round-trip through the service toolchain", () => {
  it("center 128x128 rectangle: 16384 holes, unchanged through the loader", async () => {
    const mask = fillRectangle(createMask(256, 256), { x: 64, y: 64 }, { x: 191, y: 191 });
    expect(holeCount(mask)).toBe(16384);

    const png = await nodeCodec.encodeGray(256, 256, toGrayscale(mask));
    const maskPath = join(tmp, "editor-mask.png");
    const backPath = join(tmp, "loader-mask.png");
    writeFileSync(maskPath, png);

    const stdout = execFileSync("python3", ["-c", PYTHON_ROUNDTRIP, maskPath, backPath], {
      encoding: "utf-8",
    });
    expect(Number(stdout.trim())).toBe(16384);

    const returned = decodeGray(new Uint8Array(readFileSync(backPath)));
    expect(returned.width).toBe(256);
    const back = fromGrayscale(returned.width, returned.height, returned.gray);
    expect(back.data).toEqual(mask.data);
  });

  it("irregular painted mask survives the same round trip", async () => {
    let mask = createMask(256, 256);
    mask = fillRectangle(mask, { x: 10, y: 200, }, { x: 90, y: 230 });
    const { paintStroke } = await import("../src/mask.js");
    mask = paintStroke(
      mask,
      [
        { x: 30, y: 30 },
        { x: 180, y: 60 },
        { x: 120, y: 150 },
      ],
      { mode: "paint", radius: 9 },
    );
    const png = await nodeCodec.encodeGray(256, 256, toGrayscale(mask));
    const maskPath = join(tmp, "irregular.png");
    const backPath = join(tmp, "irregular-back.png");
    writeFileSync(maskPath, png);
    execFileSync("python3", ["-c", PYTHON_ROUNDTRIP, maskPath, backPath]);
    const returned = decodeGray(new Uint8Array(readFileSync(backPath)));
    expect(fromGrayscale(256, 256, returned.gray).data).toEqual(mask.data);
  });
});
