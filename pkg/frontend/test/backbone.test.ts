import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import {
  OUTPUT_CHANNELS,
  STRIDE,
  flattenSpatial,
  loadBackbone,
  saveBackbone,
  seededBackbone,
} from "../src/backbone.js";

function noiseInput(h: number, w: number, seed = 1): Float32Array {
  const data = new Float32Array(3 * h * w);
  let s = seed >>> 0;
  for (let i = 0; i < data.length; i++) {
    s = (s * 1664525 + 1013904223) >>> 0;
    data[i] = (s >>> 8) / 2 ** 24;
  }
  return data;
}

describe("backbone", () => {
  it("reduces 384x384 to 12x12 at 512 channels (stride 32)", () => {
    const bb = seededBackbone(7);
    const fm = bb.forward(noiseInput(384, 384), 384, 384);
    expect(fm.channels).toBe(OUTPUT_CHANNELS);
    expect(fm.height).toBe(384 / STRIDE);
    expect(fm.width).toBe(384 / STRIDE);
    const { c, l } = flattenSpatial(fm);
    expect(c).toBe(512);
    expect(l).toBe(144);
  });

  it("handles non-square inputs with ceil division", () => {
    const bb = seededBackbone(7);
    const fm = bb.forward(noiseInput(96, 160), 96, 160);
    expect(fm.height).toBe(3);
    expect(fm.width).toBe(5);
  });

  it("is deterministic for a fixed seed and produces finite activations", () => {
    const a = seededBackbone(13).forward(noiseInput(64, 64), 64, 64);
    const b = seededBackbone(13).forward(noiseInput(64, 64), 64, 64);
    expect(Buffer.from(a.data.buffer).equals(Buffer.from(b.data.buffer))).toBe(true);
    let alive = 0;
    for (const v of a.data) {
      expect(Number.isFinite(v)).toBe(true);
      if (v > 0) alive++;
    }
    expect(alive).toBeGreaterThan(0);
  });

  it("differs across seeds", () => {
    const a = seededBackbone(1).forward(noiseInput(64, 64), 64, 64);
    const b = seededBackbone(2).forward(noiseInput(64, 64), 64, 64);
    expect(Buffer.from(a.data.buffer).equals(Buffer.from(b.data.buffer))).toBe(false);
  });

  it("round-trips through the weights file", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bbw-"));
    const file = path.join(dir, "weights.mqbw");
    const bb = seededBackbone(21);
    saveBackbone(bb, file);
    const loaded = loadBackbone(file);
    const x = noiseInput(64, 64);
    const a = bb.forward(x, 64, 64);
    const b = loaded.forward(x, 64, 64);
    expect(Buffer.from(a.data.buffer).equals(Buffer.from(b.data.buffer))).toBe(true);
  });

  it("rejects weight files with a bad magic", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bbw-"));
    const file = path.join(dir, "bad.mqbw");
    fs.writeFileSync(file, Buffer.from("NOPE00000000"));
    expect(() => loadBackbone(file)).toThrow(/magic/);
  });
});
