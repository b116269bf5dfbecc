import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { encodeFeatureFile, readFeatureFile, writeFeatureFileAtomic } from "../src/featfile.js";

describe("feature files", () => {
  it("encodes the documented header layout", () => {
    const buf = encodeFeatureFile(2, 3, Float64Array.from([1, 2, 3, 4, 5, 6]));
    expect(buf.toString("ascii", 0, 4)).toBe("MQAF");
    expect(buf.readUInt32LE(4)).toBe(1);
    expect(buf.readUInt32LE(8)).toBe(2);
    expect(buf.readUInt32LE(12)).toBe(3);
    expect(buf.length).toBe(16 + 4 * 6);
    expect(buf.readFloatLE(16)).toBe(1);
    expect(buf.readFloatLE(16 + 4 * 5)).toBe(6);
  });

  it("round-trips through write and read", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "feat-"));
    const file = path.join(dir, "a.mqaf");
    const values = Float64Array.from({ length: 12 }, (_, i) => Math.sin(i) * 3);
    writeFeatureFileAtomic(file, 3, 4, values);
    const back = readFeatureFile(file);
    expect(back.c).toBe(3);
    expect(back.l).toBe(4);
    for (let i = 0; i < 12; i++) {
      expect(back.values[i]).toBe(Math.fround(values[i]));
    }
    // atomic write leaves no temp droppings
    expect(fs.readdirSync(dir)).toEqual(["a.mqaf"]);
  });

  it("rejects non-finite payloads and wrong sizes", () => {
    expect(() => encodeFeatureFile(1, 2, Float64Array.from([1, NaN]))).toThrow(/non-finite/);
    expect(() => encodeFeatureFile(2, 2, Float64Array.from([1, 2, 3]))).toThrow(/expected 4/);
  });
});
