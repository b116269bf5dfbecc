/** Frozen convolutional backbone with the engine's tap-point geometry.
 *
 * Five 3x3 stride-2 convolutions with ReLUs reduce the input by a factor of
 * 32 and end at 512 channels, matching the final-convolutional-stage tap of
 * the reference backbone (c = 512, l = flattened spatial extent). Weights
 * come from a seeded generator by default so exports are reproducible
 * anywhere; a binary weights file can replace them when trained weights are
 * available (see WEIGHTS format below).
 *
 * WEIGHTS file: magic "MQBW", u32 LE version = 1, u32 layer count, then per
 * layer u32 cin, u32 cout, f32 kernel (cout*cin*3*3, row-major), f32 bias
 * (cout).
 */

import * as fs from "node:fs";

import { Rng } from "./rng.js";

export const OUTPUT_CHANNELS = 512;
export const STRIDE = 32;

const STAGE_CHANNELS = [3, 8, 16, 32, 64, OUTPUT_CHANNELS];
const KERNEL = 3;

export interface ConvLayer {
  cin: number;
  cout: number;
  /** cout * cin * 3 * 3 row-major. */
  weight: Float32Array;
  bias: Float32Array;
}

export interface FeatureMap {
  channels: number;
  height: number;
  width: number;
  /** planar CHW */
  data: Float64Array;
}

export class Backbone {
  constructor(public layers: ConvLayer[]) {}

  /** Forward an image (CHW, 3 planes) to the last conv stage, ReLU applied. */
  forward(data: Float32Array | Float64Array, height: number, width: number): FeatureMap {
    let cur: FeatureMap = {
      channels: 3,
      height,
      width,
      data: Float64Array.from(data),
    };
    for (const layer of this.layers) {
      cur = convStride2Relu(cur, layer);
    }
    return cur;
  }
}

/** Deterministic backbone from a seed (He-scaled normal weights, zero bias). */
export function seededBackbone(seed: number | bigint): Backbone {
  const rng = new Rng(seed);
  const layers: ConvLayer[] = [];
  for (let i = 0; i + 1 < STAGE_CHANNELS.length; i++) {
    const cin = STAGE_CHANNELS[i];
    const cout = STAGE_CHANNELS[i + 1];
    const std = Math.sqrt(2 / (cin * KERNEL * KERNEL));
    const weight = new Float32Array(cout * cin * KERNEL * KERNEL);
    for (let j = 0; j < weight.length; j++) weight[j] = rng.normal() * std;
    layers.push({ cin, cout, weight, bias: new Float32Array(cout) });
  }
  return new Backbone(layers);
}

export function loadBackbone(path: string): Backbone {
  const buf = fs.readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "MQBW") {
    throw new Error(`backbone weight file ${path} has a bad magic`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new Error(`backbone weight file ${path}: unsupported version ${version}`);
  const nLayers = buf.readUInt32LE(8);
  let off = 12;
  const layers: ConvLayer[] = [];
  for (let i = 0; i < nLayers; i++) {
    const cin = buf.readUInt32LE(off);
    const cout = buf.readUInt32LE(off + 4);
    off += 8;
    const wlen = cout * cin * KERNEL * KERNEL;
    const weight = new Float32Array(wlen);
    for (let j = 0; j < wlen; j++, off += 4) weight[j] = buf.readFloatLE(off);
    const bias = new Float32Array(cout);
    for (let j = 0; j < cout; j++, off += 4) bias[j] = buf.readFloatLE(off);
    layers.push({ cin, cout, weight, bias });
  }
  if (layers.length === 0 || layers[layers.length - 1].cout !== OUTPUT_CHANNELS) {
    throw new Error(`backbone weight file ${path} does not end at ${OUTPUT_CHANNELS} channels`);
  }
  return new Backbone(layers);
}

export function saveBackbone(backbone: Backbone, path: string): void {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(12);
  head.write("MQBW", 0, "ascii");
  head.writeUInt32LE(1, 4);
  head.writeUInt32LE(backbone.layers.length, 8);
  chunks.push(head);
  for (const layer of backbone.layers) {
    const buf = Buffer.alloc(8 + 4 * (layer.weight.length + layer.bias.length));
    buf.writeUInt32LE(layer.cin, 0);
    buf.writeUInt32LE(layer.cout, 4);
    let off = 8;
    for (let j = 0; j < layer.weight.length; j++, off += 4) buf.writeFloatLE(layer.weight[j], off);
    for (let j = 0; j < layer.bias.length; j++, off += 4) buf.writeFloatLE(layer.bias[j], off);
    chunks.push(buf);
  }
  fs.writeFileSync(path, Buffer.concat(chunks));
}

/** 3x3 stride-2 convolution with 'same' padding, then ReLU. */
function convStride2Relu(input: FeatureMap, layer: ConvLayer): FeatureMap {
  if (input.channels !== layer.cin) {
    throw new Error(`conv expects ${layer.cin} channels, got ${input.channels}`);
  }
  const oh = Math.ceil(input.height / 2);
  const ow = Math.ceil(input.width / 2);
  const padH = Math.max((oh - 1) * 2 + KERNEL - input.height, 0);
  const padW = Math.max((ow - 1) * 2 + KERNEL - input.width, 0);
  const padTop = Math.floor(padH / 2);
  const padLeft = Math.floor(padW / 2);
  const out = new Float64Array(layer.cout * oh * ow);
  const inPlane = input.height * input.width;
  const outPlane = oh * ow;
  for (let co = 0; co < layer.cout; co++) {
    const wBase = co * layer.cin * KERNEL * KERNEL;
    for (let oy = 0; oy < oh; oy++) {
      const iy0 = oy * 2 - padTop;
      for (let ox = 0; ox < ow; ox++) {
        const ix0 = ox * 2 - padLeft;
        let acc = layer.bias[co];
        for (let ci = 0; ci < layer.cin; ci++) {
          const planeBase = ci * inPlane;
          const wCi = wBase + ci * KERNEL * KERNEL;
          for (let ky = 0; ky < KERNEL; ky++) {
            const iy = iy0 + ky;
            if (iy < 0 || iy >= input.height) continue;
            const rowBase = planeBase + iy * input.width;
            const wRow = wCi + ky * KERNEL;
            for (let kx = 0; kx < KERNEL; kx++) {
              const ix = ix0 + kx;
              if (ix < 0 || ix >= input.width) continue;
              acc += layer.weight[wRow + kx] * input.data[rowBase + ix];
            }
          }
        }
        out[co * outPlane + oy * ow + ox] = acc > 0 ? acc : 0;
      }
    }
  }
  return { channels: layer.cout, height: oh, width: ow, data: out };
}

/** Flatten spatial dimensions: (c, h, w) -> (c, h*w), row-major. */
export function flattenSpatial(fm: FeatureMap): { c: number; l: number; data: Float64Array } {
  return { c: fm.channels, l: fm.height * fm.width, data: fm.data };
}
