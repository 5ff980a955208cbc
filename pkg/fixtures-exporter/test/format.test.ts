import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";
import { decodeWeights, encodeWeights, quantize, readRgbPng, writeRgbPng, WeightContainer } from "../src/format";

describe("SRW1 container", () => {
  it("round-trips a layer chain bit-exactly", () => {
    const container: WeightContainer = {
      inputShape: [8, 8, 3],
      layers: [
        {
          kind: "conv2d",
          kh: 3,
          kw: 3,
          cin: 3,
          cout: 4,
          kernel: Float32Array.from({ length: 3 * 3 * 3 * 4 }, (_, i) => Math.sin(i)),
          bias: Float32Array.from({ length: 4 }, (_, i) => i * 0.25),
        },
        { kind: "relu" },
        { kind: "maxpool2" },
        { kind: "globalAvgPool" },
        {
          kind: "dense",
          nIn: 4,
          nOut: 10,
          weights: Float32Array.from({ length: 40 }, (_, i) => Math.cos(i)),
          bias: new Float32Array(10),
        },
      ],
    };
    const buf = encodeWeights(container);
    expect(buf.subarray(0, 4).toString("ascii")).toBe("SRW1");
    const back = decodeWeights(buf);
    expect(back.inputShape).toEqual([8, 8, 3]);
    expect(back.layers.length).toBe(5);
    const conv = back.layers[0];
    if (conv.kind !== "conv2d") throw new Error("expected conv2d");
    expect(Array.from(conv.kernel)).toEqual(Array.from((container.layers[0] as any).kernel));
    const dense = back.layers[4];
    if (dense.kind !== "dense") throw new Error("expected dense");
    expect(Array.from(dense.weights)).toEqual(Array.from((container.layers[4] as any).weights));
  });

  it("rejects a bad magic", () => {
    expect(() => decodeWeights(Buffer.from("NOPE0000"))).toThrow(/magic/);
  });
});

describe("PNG io", () => {
  it("quantizes round-half-away and clamps", () => {
    expect(quantize(0)).toBe(0);
    expect(quantize(1)).toBe(255);
    expect(quantize(128 / 255)).toBe(128);
    expect(quantize(1.2)).toBe(255);
    expect(quantize(-0.1)).toBe(0);
  });

  it("round-trips byte values exactly", () => {
    const side = 6;
    const pixels = new Float64Array(side * side * 3);
    for (let i = 0; i < pixels.length; i++) pixels[i] = ((i * 37) % 256) / 255;
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "fx-"));
    const file = path.join(dir, "t.png");
    writeRgbPng(file, pixels, side);
    const back = readRgbPng(file);
    expect(back.side).toBe(side);
    expect(Array.from(back.pixels)).toEqual(Array.from(pixels));
  });
});
