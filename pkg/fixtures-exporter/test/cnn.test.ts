import { describe, expect, it } from "vitest";
import { argmax, forward, initNet, logits, toContainer, trainNet, TRAIN_SIDE } from "../src/cnn";
import { buildSplit } from "../src/dataset";
import { decodeWeights, encodeWeights } from "../src/format";
import { Rng } from "../src/rng";

describe("network", () => {
  it("serializes the expected layer chain", () => {
    const net = initNet(3);
    const container = toContainer(net);
    expect(container.inputShape).toEqual([32, 32, 3]);
    expect(container.layers.map((l) => l.kind)).toEqual([
      "conv2d",
      "relu",
      "maxpool2",
      "conv2d",
      "relu",
      "maxpool2",
      "conv2d",
      "relu",
      "globalAvgPool",
      "dense",
    ]);
    const dense = container.layers[container.layers.length - 1];
    if (dense.kind !== "dense") throw new Error("expected dense head");
    expect(dense.nOut).toBe(10);
    const back = decodeWeights(encodeWeights(container));
    expect(back.layers.length).toBe(container.layers.length);
  });

  it("is seed-deterministic", () => {
    const a = encodeWeights(toContainer(initNet(9)));
    const b = encodeWeights(toContainer(initNet(9)));
    const c = encodeWeights(toContainer(initNet(10)));
    expect(Buffer.compare(a, b)).toBe(0);
    expect(Buffer.compare(a, c)).not.toBe(0);
  });

  it("scores any square side through global pooling", () => {
    const net = initNet(4);
    const z32 = logits(net, new Float32Array(32 * 32 * 3).fill(0.5), 32);
    const z64 = logits(net, new Float32Array(64 * 64 * 3).fill(0.5), 64);
    expect(z32.length).toBe(10);
    expect(z64.length).toBe(10);
    for (const v of z32) expect(Number.isFinite(v)).toBe(true);
  });

  it("conv matches a hand-evaluated same-padding case", () => {
    const net = initNet(1);
    // overwrite conv1 with an all-ones 3x3 kernel on channel sums
    net.conv1.kernel.fill(0);
    for (let k = 0; k < 9; k++) net.conv1.kernel[k * 3 * 8] = 1; // cin 0 -> cout 0
    const x = new Float32Array(3 * 3 * 3);
    x[(1 * 3 + 1) * 3] = 1; // center pixel, channel 0
    const cache = forward(net, x, 3);
    // relu(conv1) channel 0: every position covered by the 3x3 window of center
    for (let r = 0; r < 3; r++) {
      for (let c = 0; c < 3; c++) {
        expect(cache.a1[(r * 3 + c) * 8]).toBe(1);
      }
    }
  });

  it("learns a small training split to high accuracy", () => {
    const split = buildSplit(300, TRAIN_SIDE, new Rng(5));
    const net = initNet(5);
    const { trainAccuracy } = trainNet(net, split.images, split.labels, {
      epochs: 12,
      batchSize: 32,
      learningRate: 0.004,
    });
    expect(trainAccuracy).toBeGreaterThan(0.85);
    // sanity: predictions cover several classes
    const seen = new Set<number>();
    for (const img of split.images.slice(0, 40)) {
      seen.add(argmax(logits(net, Float32Array.from(img), TRAIN_SIDE)));
    }
    expect(seen.size).toBeGreaterThan(3);
  });
});
