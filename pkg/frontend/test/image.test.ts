import { describe, expect, it } from "vitest";

import { crop, decodePnm, encodePpm, resizeShortSide, resizedShape, Image, ImageError } from "../src/image.js";

function gradientImage(width: number, height: number): Image {
  const plane = width * height;
  const data = new Float32Array(3 * plane);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      data[y * width + x] = x / Math.max(width - 1, 1);
      data[plane + y * width + x] = y / Math.max(height - 1, 1);
      data[2 * plane + y * width + x] = 0.25;
    }
  }
  return { width, height, channels: 3, data };
}

describe("pnm codec", () => {
  it("round-trips a P6 image", () => {
    const img = gradientImage(17, 9);
    const back = decodePnm(encodePpm(img));
    expect(back.width).toBe(17);
    expect(back.height).toBe(9);
    for (let i = 0; i < back.data.length; i++) {
      expect(Math.abs(back.data[i] - img.data[i])).toBeLessThanOrEqual(1 / 255 + 1e-6);
    }
  });

  it("replicates grayscale to three planes", () => {
    const header = Buffer.from("P5\n2 2\n255\n", "ascii");
    const body = Buffer.from([0, 64, 128, 255]);
    const img = decodePnm(Buffer.concat([header, body]));
    const plane = 4;
    for (let i = 0; i < plane; i++) {
      expect(img.data[i]).toBe(img.data[plane + i]);
      expect(img.data[i]).toBe(img.data[2 * plane + i]);
    }
  });

  it("rejects foreign formats and truncation", () => {
    expect(() => decodePnm(Buffer.from("GIF89a....."))).toThrow(ImageError);
    const short = Buffer.concat([Buffer.from("P6\n4 4\n255\n", "ascii"), Buffer.alloc(5)]);
    expect(() => decodePnm(short)).toThrow(/truncated/);
  });
});

describe("short-side resize", () => {
  it("maps a 512x384 input to short side 512 with the aspect kept", () => {
    // width 512, height 384: the short side is the height
    expect(resizedShape(512, 384, 512)).toEqual({ width: 683, height: 512 });
    const resized = resizeShortSide(gradientImage(512, 384), 512);
    expect(Math.min(resized.width, resized.height)).toBe(512);
    const before = 512 / 384;
    const after = resized.width / resized.height;
    expect(Math.abs(before - after)).toBeLessThan(0.01);
  });

  it("maps to 768 for test-time inputs", () => {
    expect(resizedShape(256, 192, 768)).toEqual({ width: 1024, height: 768 });
    expect(resizedShape(192, 256, 768)).toEqual({ width: 768, height: 1024 });
  });

  it("keeps a constant image constant", () => {
    const img = gradientImage(20, 30);
    img.data.fill(0.5);
    const resized = resizeShortSide(img, 40);
    for (const v of resized.data) expect(Math.abs(v - 0.5)).toBeLessThan(1e-6);
  });
});

describe("crop", () => {
  it("extracts the exact window", () => {
    const img = gradientImage(10, 10);
    const c = crop(img, 2, 3, 4);
    expect(c.width).toBe(4);
    expect(c.height).toBe(4);
    expect(c.data[0]).toBeCloseTo(img.data[3 * 10 + 2], 12);
  });

  it("refuses windows outside the image", () => {
    const img = gradientImage(10, 10);
    expect(() => crop(img, 8, 0, 4)).toThrow(/exceeds/);
    expect(() => crop(img, -1, 0, 4)).toThrow(/exceeds/);
  });
});
