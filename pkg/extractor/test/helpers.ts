import * as fs from "node:fs";
import { PNG } from "pngjs";

export type PixelFn = (x: number, y: number) => [number, number, number];

/** 24-bit bottom-up BI_RGB bitmap, the layout TID images use. */
export function encodeBmp(width: number, height: number, pixel: PixelFn): Buffer {
  const rowSize = Math.ceil((width * 3) / 4) * 4;
  const dataSize = rowSize * height;
  const buf = Buffer.alloc(54 + dataSize);
  buf.write("BM", 0, "ascii");
  buf.writeUInt32LE(54 + dataSize, 2);
  buf.writeUInt32LE(54, 10);
  buf.writeUInt32LE(40, 14);
  buf.writeInt32LE(width, 18);
  buf.writeInt32LE(height, 22); // positive: bottom-up
  buf.writeUInt16LE(1, 26);
  buf.writeUInt16LE(24, 28);
  buf.writeUInt32LE(0, 30);
  buf.writeUInt32LE(dataSize, 34);
  for (let y = 0; y < height; y++) {
    const row = 54 + (height - 1 - y) * rowSize;
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      buf[row + x * 3] = b;
      buf[row + x * 3 + 1] = g;
      buf[row + x * 3 + 2] = r;
    }
  }
  return buf;
}

export function encodePpm(width: number, height: number, pixel: PixelFn): Buffer {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, "ascii");
  const data = Buffer.alloc(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 3;
      data[i] = r;
      data[i + 1] = g;
      data[i + 2] = b;
    }
  }
  return Buffer.concat([header, data]);
}

export function encodePng(width: number, height: number, pixel: PixelFn): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 4;
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

/** Deterministic colorful test pattern. */
export function pattern(seed: number): PixelFn {
  return (x, y) => [
    (x * 37 + y * 11 + seed * 101) % 256,
    (x * 5 + y * 83 + seed * 29) % 256,
    (x * 59 + y * 3 + seed * 7) % 256,
  ];
}

export function writeTempImages(
  dir: string,
  count: number,
  ext: "bmp" | "ppm" | "png",
  size: [number, number] = [40, 30],
): { imageId: string; path: string }[] {
  fs.mkdirSync(dir, { recursive: true });
  const encode = { bmp: encodeBmp, ppm: encodePpm, png: encodePng }[ext];
  const refs = [];
  for (let i = 0; i < count; i++) {
    const file = `${dir}/img${String(i).padStart(2, "0")}.${ext}`;
    fs.writeFileSync(file, encode(size[0], size[1], pattern(i)));
    refs.push({ imageId: `img${String(i).padStart(2, "0")}`, path: file });
  }
  return refs;
}
