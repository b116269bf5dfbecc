/** Binary feature files consumed by the quality engine.
 *
 * Layout: magic "MQAF", u32 LE version = 1, u32 c, u32 l, then c*l
 * little-endian float32 values row-major. Writes are atomic (temp file in
 * the same directory, then rename).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const FEATURE_MAGIC = "MQAF";
export const FEATURE_VERSION = 1;

export function encodeFeatureFile(c: number, l: number, values: Float64Array | Float32Array): Buffer {
  if (values.length !== c * l) {
    throw new Error(`feature payload has ${values.length} values, expected ${c * l}`);
  }
  const buf = Buffer.alloc(16 + 4 * c * l);
  buf.write(FEATURE_MAGIC, 0, "ascii");
  buf.writeUInt32LE(FEATURE_VERSION, 4);
  buf.writeUInt32LE(c, 8);
  buf.writeUInt32LE(l, 12);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (!Number.isFinite(v)) throw new Error(`non-finite feature value at index ${i}`);
    buf.writeFloatLE(Math.fround(v), 16 + 4 * i);
  }
  return buf;
}

export function writeFeatureFileAtomic(filePath: string, c: number, l: number, values: Float64Array | Float32Array): void {
  const buf = encodeFeatureFile(c, l, values);
  const dir = path.dirname(filePath);
  fs.mkdirSync(dir, { recursive: true });
  const tmp = path.join(dir, `.${path.basename(filePath)}.tmp`);
  fs.writeFileSync(tmp, buf);
  fs.renameSync(tmp, filePath);
}

export interface FeatureHeader {
  c: number;
  l: number;
  values: Float32Array;
}

/** Reader used by the exporter's own round-trip checks. */
export function readFeatureFile(filePath: string): FeatureHeader {
  const buf = fs.readFileSync(filePath);
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== FEATURE_MAGIC) {
    throw new Error(`${filePath}: bad feature-file magic`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== FEATURE_VERSION) throw new Error(`${filePath}: unsupported version ${version}`);
  const c = buf.readUInt32LE(8);
  const l = buf.readUInt32LE(12);
  if (buf.length < 16 + 4 * c * l) throw new Error(`${filePath}: truncated payload`);
  const values = new Float32Array(c * l);
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(16 + 4 * i);
    if (!Number.isFinite(values[i])) throw new Error(`${filePath}: non-finite value at ${i}`);
  }
  return { c, l, values };
}
