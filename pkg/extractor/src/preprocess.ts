/**
 * Image decoding (BMP, PPM, PNG) and the per-model preprocessing pipeline.
 *
 * Decoded pixels are RGB uint8; preprocessing scales to [0, 1], normalizes
 * per channel, and optionally resizes (bilinear). The result is exactly what
 * gets stored as the archive's "input" layer.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";
import { PNG } from "pngjs";

import type { PreprocessSpec } from "./registry.js";

export interface DecodedImage {
  width: number;
  height: number;
  /** RGB, row-major, 3 bytes per pixel */
  data: Uint8Array;
}

export class ImageDecodeError extends Error {}

/** Uncompressed 24/32-bit BI_RGB bitmaps (the TID distribution format). */
export function decodeBmp(buffer: Buffer): DecodedImage {
  if (buffer.length < 54 || buffer.toString("ascii", 0, 2) !== "BM") {
    throw new ImageDecodeError("not a BMP file");
  }
  const dataOffset = buffer.readUInt32LE(10);
  const width = buffer.readInt32LE(18);
  const heightRaw = buffer.readInt32LE(22);
  const bpp = buffer.readUInt16LE(28);
  const compression = buffer.readUInt32LE(30);
  if (compression !== 0) throw new ImageDecodeError(`unsupported BMP compression ${compression}`);
  if (bpp !== 24 && bpp !== 32) throw new ImageDecodeError(`unsupported BMP bit depth ${bpp}`);
  const height = Math.abs(heightRaw);
  const bottomUp = heightRaw > 0;
  const bytesPerPixel = bpp / 8;
  const rowSize = Math.ceil((width * bytesPerPixel) / 4) * 4;
  if (dataOffset + rowSize * height > buffer.length) {
    throw new ImageDecodeError("BMP pixel data truncated");
  }
  const data = new Uint8Array(width * height * 3);
  for (let row = 0; row < height; row++) {
    const srcRow = bottomUp ? height - 1 - row : row;
    let src = dataOffset + srcRow * rowSize;
    let dst = row * width * 3;
    for (let col = 0; col < width; col++) {
      data[dst] = buffer[src + 2]; // BGR -> RGB
      data[dst + 1] = buffer[src + 1];
      data[dst + 2] = buffer[src];
      src += bytesPerPixel;
      dst += 3;
    }
  }
  return { width, height, data };
}

/** Binary PPM (P6), handy for fixtures. */
export function decodePpm(buffer: Buffer): DecodedImage {
  const tokens: string[] = [];
  let pos = 0;
  while (tokens.length < 4 && pos < buffer.length) {
    // skip whitespace and #-comments between header tokens
    while (pos < buffer.length && /\s/.test(String.fromCharCode(buffer[pos]))) pos++;
    if (buffer[pos] === 0x23) {
      while (pos < buffer.length && buffer[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buffer.length && !/\s/.test(String.fromCharCode(buffer[pos]))) pos++;
    tokens.push(buffer.toString("ascii", start, pos));
  }
  if (tokens[0] !== "P6") throw new ImageDecodeError("not a binary PPM (P6) file");
  const [width, height, maxval] = tokens.slice(1).map(Number);
  if (!(width > 0 && height > 0) || maxval !== 255) {
    throw new ImageDecodeError(`unsupported PPM header ${tokens.join(" ")}`);
  }
  pos += 1; // single whitespace after maxval
  const need = width * height * 3;
  if (pos + need > buffer.length) throw new ImageDecodeError("PPM pixel data truncated");
  return { width, height, data: new Uint8Array(buffer.subarray(pos, pos + need)) };
}

export function decodePng(buffer: Buffer): DecodedImage {
  let png;
  try {
    png = PNG.sync.read(buffer);
  } catch (err) {
    throw new ImageDecodeError(`PNG decode failed: ${(err as Error).message}`);
  }
  const { width, height } = png;
  const data = new Uint8Array(width * height * 3);
  for (let i = 0, j = 0; i < width * height; i++, j += 4) {
    data[i * 3] = png.data[j];
    data[i * 3 + 1] = png.data[j + 1];
    data[i * 3 + 2] = png.data[j + 2];
  }
  return { width, height, data };
}

export function decodeImageFile(filePath: string): DecodedImage {
  let buffer: Buffer;
  try {
    buffer = fs.readFileSync(filePath);
  } catch (err) {
    throw new ImageDecodeError(`cannot read image "${filePath}": ${(err as Error).message}`);
  }
  const ext = path.extname(filePath).toLowerCase();
  try {
    if (ext === ".bmp") return decodeBmp(buffer);
    if (ext === ".ppm") return decodePpm(buffer);
    if (ext === ".png") return decodePng(buffer);
  } catch (err) {
    throw new ImageDecodeError(`cannot decode "${filePath}": ${(err as Error).message}`);
  }
  throw new ImageDecodeError(`unsupported image extension "${ext}" for "${filePath}"`);
}

/** Scale, normalize, resize: returns the float32 tensor stored as "input". */
export function preprocess(image: DecodedImage, spec: PreprocessSpec): tf.Tensor3D {
  return tf.tidy(() => {
    let x = tf
      .tensor3d(image.data, [image.height, image.width, 3], "int32")
      .toFloat()
      .div(255.0) as tf.Tensor3D;
    x = x.sub(tf.tensor1d(spec.mean)).div(tf.tensor1d(spec.std)) as tf.Tensor3D;
    if (spec.resize && (spec.resize[0] !== image.height || spec.resize[1] !== image.width)) {
      x = tf.image.resizeBilinear(x, spec.resize);
    }
    return x;
  });
}
