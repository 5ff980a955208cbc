/**
 * On-disk formats shared with the attack toolkit.
 *
 * SRW1 weight container (little-endian): magic "SRW1", u32 version = 1,
 * u32 input height/width/channels, u32 layer count, then one record per
 * layer: u32 kind tag followed by the payload.
 *   1 conv2d (same padding, stride 1): u32 kh, kw, cin, cout;
 *     f32 kernel [kh][kw][cin][cout]; f32 bias [cout]
 *   2 dense: u32 nIn, nOut; f32 weights [nIn][nOut]; f32 bias [nOut]
 *   3 relu / 4 maxpool 2x2 / 5 flatten / 6 global average pool: no payload
 */

import { PNG } from "pngjs";
import * as fs from "fs";

export const LAYER = {
  conv2d: 1,
  dense: 2,
  relu: 3,
  maxpool2: 4,
  flatten: 5,
  globalAvgPool: 6,
} as const;

export type LayerRecord =
  | { kind: "conv2d"; kh: number; kw: number; cin: number; cout: number; kernel: Float32Array; bias: Float32Array }
  | { kind: "dense"; nIn: number; nOut: number; weights: Float32Array; bias: Float32Array }
  | { kind: "relu" }
  | { kind: "maxpool2" }
  | { kind: "flatten" }
  | { kind: "globalAvgPool" };

export interface WeightContainer {
  inputShape: [number, number, number];
  layers: LayerRecord[];
}

class Writer {
  private chunks: Buffer[] = [];

  u32(...values: number[]) {
    for (const v of values) {
      const b = Buffer.alloc(4);
      b.writeUInt32LE(v >>> 0, 0);
      this.chunks.push(b);
    }
  }

  f32(values: Float32Array) {
    const b = Buffer.alloc(values.length * 4);
    for (let i = 0; i < values.length; i++) b.writeFloatLE(values[i], i * 4);
    this.chunks.push(b);
  }

  raw(b: Buffer) {
    this.chunks.push(b);
  }

  bytes(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

export function encodeWeights(container: WeightContainer): Buffer {
  const w = new Writer();
  w.raw(Buffer.from("SRW1", "ascii"));
  w.u32(1, ...container.inputShape, container.layers.length);
  for (const layer of container.layers) {
    switch (layer.kind) {
      case "conv2d":
        w.u32(LAYER.conv2d, layer.kh, layer.kw, layer.cin, layer.cout);
        w.f32(layer.kernel);
        w.f32(layer.bias);
        break;
      case "dense":
        w.u32(LAYER.dense, layer.nIn, layer.nOut);
        w.f32(layer.weights);
        w.f32(layer.bias);
        break;
      case "relu":
        w.u32(LAYER.relu);
        break;
      case "maxpool2":
        w.u32(LAYER.maxpool2);
        break;
      case "flatten":
        w.u32(LAYER.flatten);
        break;
      case "globalAvgPool":
        w.u32(LAYER.globalAvgPool);
        break;
    }
  }
  return w.bytes();
}

export function decodeWeights(buf: Buffer): WeightContainer {
  if (buf.subarray(0, 4).toString("ascii") !== "SRW1") throw new Error("bad magic");
  let off = 4;
  const u32 = () => {
    const v = buf.readUInt32LE(off);
    off += 4;
    return v;
  };
  const f32 = (n: number) => {
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = buf.readFloatLE(off + i * 4);
    off += n * 4;
    return out;
  };
  const version = u32();
  if (version !== 1) throw new Error(`unsupported version ${version}`);
  const inputShape: [number, number, number] = [u32(), u32(), u32()];
  const nLayers = u32();
  const layers: LayerRecord[] = [];
  for (let i = 0; i < nLayers; i++) {
    const kind = u32();
    if (kind === LAYER.conv2d) {
      const [kh, kw, cin, cout] = [u32(), u32(), u32(), u32()];
      layers.push({ kind: "conv2d", kh, kw, cin, cout, kernel: f32(kh * kw * cin * cout), bias: f32(cout) });
    } else if (kind === LAYER.dense) {
      const [nIn, nOut] = [u32(), u32()];
      layers.push({ kind: "dense", nIn, nOut, weights: f32(nIn * nOut), bias: f32(nOut) });
    } else if (kind === LAYER.relu) {
      layers.push({ kind: "relu" });
    } else if (kind === LAYER.maxpool2) {
      layers.push({ kind: "maxpool2" });
    } else if (kind === LAYER.flatten) {
      layers.push({ kind: "flatten" });
    } else if (kind === LAYER.globalAvgPool) {
      layers.push({ kind: "globalAvgPool" });
    } else {
      throw new Error(`unknown layer tag ${kind}`);
    }
  }
  return { inputShape, layers };
}

/** Quantize [0,1] intensities to bytes with round-half-away (matches the toolkit). */
export function quantize(value: number): number {
  const v = Math.round(value * 255);
  return Math.min(255, Math.max(0, v));
}

/** Write an RGB image (row-major [h][w][3] floats in [0,1]) as 8-bit PNG. */
export function writeRgbPng(path: string, pixels: Float64Array | Float32Array, side: number): void {
  const png = new PNG({ width: side, height: side, colorType: 2 });
  for (let i = 0; i < side * side; i++) {
    png.data[i * 4] = quantize(pixels[i * 3]);
    png.data[i * 4 + 1] = quantize(pixels[i * 3 + 1]);
    png.data[i * 4 + 2] = quantize(pixels[i * 3 + 2]);
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 2 }));
}

/** Write a grayscale map (row-major [h][w] floats in [0,1]) as 8-bit PNG. */
export function writeGrayPng(path: string, scores: Float64Array | Float32Array, side: number): void {
  const png = new PNG({ width: side, height: side, colorType: 0 });
  for (let i = 0; i < side * side; i++) {
    const v = quantize(scores[i]);
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}

/** Read an 8-bit PNG back as [h][w][3] floats in [0,1] (byte / 255). */
export function readRgbPng(path: string): { side: number; pixels: Float64Array } {
  const png = PNG.sync.read(fs.readFileSync(path));
  const side = png.width;
  const pixels = new Float64Array(side * png.height * 3);
  for (let i = 0; i < side * png.height; i++) {
    pixels[i * 3] = png.data[i * 4] / 255;
    pixels[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    pixels[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { side, pixels };
}
