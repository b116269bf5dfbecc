/** Image decoding (PPM/PGM) and the resize/crop geometry. */

export interface Image {
  width: number;
  height: number;
  channels: 3;
  /** Planar CHW float32 in [0, 1]. */
  data: Float32Array;
}

export class ImageError extends Error {}

/** Decode binary PPM (P6) or PGM (P5), maxval <= 255; grayscale is replicated to RGB. */
export function decodePnm(buf: Buffer): Image {
  const header = readPnmHeader(buf);
  const { magic, width, height, maxval, offset } = header;
  const channels = magic === "P6" ? 3 : 1;
  const expected = width * height * channels;
  if (buf.length < offset + expected) {
    throw new ImageError(
      `truncated ${magic} payload: have ${buf.length - offset} bytes, need ${expected}`,
    );
  }
  const out = new Float32Array(3 * width * height);
  const plane = width * height;
  for (let i = 0; i < plane; i++) {
    if (channels === 3) {
      out[i] = buf[offset + 3 * i] / maxval;
      out[plane + i] = buf[offset + 3 * i + 1] / maxval;
      out[2 * plane + i] = buf[offset + 3 * i + 2] / maxval;
    } else {
      const v = buf[offset + i] / maxval;
      out[i] = v;
      out[plane + i] = v;
      out[2 * plane + i] = v;
    }
  }
  return { width, height, channels: 3, data: out };
}

function readPnmHeader(buf: Buffer) {
  const magic = buf.toString("ascii", 0, 2);
  if (magic !== "P6" && magic !== "P5") {
    throw new ImageError(`unsupported image magic ${JSON.stringify(magic)} (expected P6/P5)`);
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buf.length && isSpace(buf[pos])) pos++;
    if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    const token = buf.toString("ascii", start, pos);
    const value = Number(token);
    if (!Number.isFinite(value)) throw new ImageError(`bad header token ${JSON.stringify(token)}`);
    fields.push(value);
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
    throw new ImageError(`unsupported dimensions/maxval ${width}x${height}/${maxval}`);
  }
  return { magic, width, height, maxval, offset: pos };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}

/** Encode an Image back to binary PPM (test helper / debugging). */
export function encodePpm(img: Image): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  const plane = img.width * img.height;
  const body = Buffer.alloc(3 * plane);
  for (let i = 0; i < plane; i++) {
    body[3 * i] = Math.round(Math.min(1, Math.max(0, img.data[i])) * 255);
    body[3 * i + 1] = Math.round(Math.min(1, Math.max(0, img.data[plane + i])) * 255);
    body[3 * i + 2] = Math.round(Math.min(1, Math.max(0, img.data[2 * plane + i])) * 255);
  }
  return Buffer.concat([header, body]);
}

/** Output shape of a short-side resize with the aspect ratio maintained. */
export function resizedShape(width: number, height: number, shortSide: number) {
  if (width <= height) {
    return { width: shortSide, height: Math.round((height * shortSide) / width) };
  }
  return { width: Math.round((width * shortSide) / height), height: shortSide };
}

/** Bilinear resize so that min(width, height) === shortSide. */
export function resizeShortSide(img: Image, shortSide: number): Image {
  const { width: ow, height: oh } = resizedShape(img.width, img.height, shortSide);
  const out = new Float32Array(3 * ow * oh);
  const sx = img.width / ow;
  const sy = img.height / oh;
  const inPlane = img.width * img.height;
  const outPlane = ow * oh;
  for (let y = 0; y < oh; y++) {
    const fy = Math.min(Math.max((y + 0.5) * sy - 0.5, 0), img.height - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const wy = fy - y0;
    for (let x = 0; x < ow; x++) {
      const fx = Math.min(Math.max((x + 0.5) * sx - 0.5, 0), img.width - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const p = c * inPlane;
        const v =
          (1 - wy) * ((1 - wx) * img.data[p + y0 * img.width + x0] + wx * img.data[p + y0 * img.width + x1]) +
          wy * ((1 - wx) * img.data[p + y1 * img.width + x0] + wx * img.data[p + y1 * img.width + x1]);
        out[c * outPlane + y * ow + x] = v;
      }
    }
  }
  return { width: ow, height: oh, channels: 3, data: out };
}

/** Axis-aligned crop; the window must lie fully inside the image. */
export function crop(img: Image, left: number, top: number, size: number): Image {
  if (left < 0 || top < 0 || left + size > img.width || top + size > img.height) {
    throw new ImageError(
      `crop ${size}x${size}@(${left},${top}) exceeds image ${img.width}x${img.height}`,
    );
  }
  const out = new Float32Array(3 * size * size);
  const inPlane = img.width * img.height;
  const outPlane = size * size;
  for (let c = 0; c < 3; c++) {
    for (let y = 0; y < size; y++) {
      const src = c * inPlane + (top + y) * img.width + left;
      out.set(img.data.subarray(src, src + size), c * outPlane + y * size);
    }
  }
  return { width: size, height: size, channels: 3, data: out };
}
