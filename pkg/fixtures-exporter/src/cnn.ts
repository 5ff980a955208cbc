/**
 * Hand-rolled training and inference for the tiny shape classifier.
 *
 * Architecture (any square side, 3 channels in, 10 classes out):
 * conv 3x3 same -> relu -> maxpool 2 -> conv 3x3 same -> relu ->
 * maxpool 2 -> conv 3x3 same -> relu -> global average pool -> dense.
 * Global pooling keeps the head size-independent, so the trained weights
 * also classify upscaled square renders.
 *
 * Typed-array loops train this network in about a minute; the tfjs CPU
 * backend needs several seconds per batch for the same model and its wasm
 * backend ships no conv backprop kernels, so the dependency is not worth
 * carrying for a network this small.
 */

import { LayerRecord, WeightContainer } from "./format";
import { Rng } from "./rng";

export const CHANNELS = 3;
export const NUM_CLASSES = 10;
export const TRAIN_SIDE = 32;

const F1 = 8;
const F2 = 16;
const F3 = 32;

// First-layer seed filters: classic oriented-edge and spot detectors give
// the optimizer a useful basis on glyph images instead of waiting for one
// to emerge from random noise (they remain trainable).
const EDGE_BANK: number[][] = [
  [-1, 0, 1, -2, 0, 2, -1, 0, 1], // vertical edges
  [-1, -2, -1, 0, 0, 0, 1, 2, 1], // horizontal edges
  [0, 1, 2, -1, 0, 1, -2, -1, 0], // diagonal /
  [2, 1, 0, 1, 0, -1, 0, -1, -2], // diagonal \
  [0, -1, 0, -1, 4, -1, 0, -1, 0], // spot / laplacian
  [1, 1, 1, 1, -8, 1, 1, 1, 1], // inverted spot
  [1, 1, 1, 0, 0, 0, -1, -1, -1], // top-bottom contrast
  [1, 0, -1, 1, 0, -1, 1, 0, -1], // left-right contrast
];

export interface ConvParams {
  kernel: Float32Array; // [kh][kw][cin][cout]
  bias: Float32Array;
  cin: number;
  cout: number;
}

export interface DenseParams {
  weights: Float32Array; // [nIn][nOut]
  bias: Float32Array;
  nIn: number;
  nOut: number;
}

export interface Net {
  conv1: ConvParams;
  conv2: ConvParams;
  conv3: ConvParams;
  dense: DenseParams;
}

function glorot(rng: Rng, fanIn: number, fanOut: number, count: number): Float32Array {
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = Math.fround(rng.uniform(-limit, limit));
  return out;
}

export function initNet(seed: number): Net {
  const rng = new Rng(seed ^ 0x5eed);
  const conv = (cin: number, cout: number): ConvParams => ({
    kernel: glorot(rng, 9 * cin, 9 * cout, 9 * cin * cout),
    bias: new Float32Array(cout),
    cin,
    cout,
  });
  const conv1 = conv(CHANNELS, F1);
  // kernel layout [kh][kw][cin][cout]: each output channel starts as one
  // edge-bank filter applied evenly across input channels
  for (let co = 0; co < F1; co++) {
    const bank = EDGE_BANK[co % EDGE_BANK.length];
    for (let k = 0; k < 9; k++) {
      for (let ci = 0; ci < CHANNELS; ci++) {
        conv1.kernel[(k * CHANNELS + ci) * F1 + co] = Math.fround(bank[k] / (3 * CHANNELS));
      }
    }
  }
  return {
    conv1,
    conv2: conv(F1, F2),
    conv3: conv(F2, F3),
    dense: {
      weights: glorot(rng, F3, NUM_CLASSES, F3 * NUM_CLASSES),
      bias: new Float32Array(NUM_CLASSES),
      nIn: F3,
      nOut: NUM_CLASSES,
    },
  };
}

function convForward(input: Float32Array, side: number, p: ConvParams): Float32Array {
  const { kernel, bias, cin, cout } = p;
  const out = new Float32Array(side * side * cout);
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      const base = (r * side + c) * cout;
      for (let co = 0; co < cout; co++) out[base + co] = bias[co];
      for (let kr = -1; kr <= 1; kr++) {
        const rr = r + kr;
        if (rr < 0 || rr >= side) continue;
        for (let kc = -1; kc <= 1; kc++) {
          const cc = c + kc;
          if (cc < 0 || cc >= side) continue;
          const inBase = (rr * side + cc) * cin;
          const kBase = ((kr + 1) * 3 + (kc + 1)) * cin * cout;
          for (let ci = 0; ci < cin; ci++) {
            const v = input[inBase + ci];
            if (v === 0) continue;
            const kk = kBase + ci * cout;
            for (let co = 0; co < cout; co++) out[base + co] += v * kernel[kk + co];
          }
        }
      }
    }
  }
  return out;
}

function reluInPlace(x: Float32Array): Float32Array {
  for (let i = 0; i < x.length; i++) if (x[i] < 0) x[i] = 0;
  return x;
}

function maxpool2(input: Float32Array, side: number, ch: number) {
  const half = side >> 1;
  const out = new Float32Array(half * half * ch);
  const arg = new Int32Array(half * half * ch);
  for (let r = 0; r < half; r++) {
    for (let c = 0; c < half; c++) {
      for (let k = 0; k < ch; k++) {
        let best = -Infinity;
        let bestIdx = -1;
        for (let dr = 0; dr < 2; dr++) {
          for (let dc = 0; dc < 2; dc++) {
            const idx = ((2 * r + dr) * side + (2 * c + dc)) * ch + k;
            if (input[idx] > best) {
              best = input[idx];
              bestIdx = idx;
            }
          }
        }
        out[(r * half + c) * ch + k] = best;
        arg[(r * half + c) * ch + k] = bestIdx;
      }
    }
  }
  return { out, arg, side: half };
}

function gap(input: Float32Array, side: number, ch: number): Float32Array {
  const out = new Float32Array(ch);
  const n = side * side;
  for (let i = 0; i < n; i++) {
    for (let k = 0; k < ch; k++) out[k] += input[i * ch + k];
  }
  for (let k = 0; k < ch; k++) out[k] = Math.fround(out[k] / n);
  return out;
}

function dense(input: Float32Array, p: DenseParams): Float32Array {
  const out = new Float32Array(p.nOut);
  for (let o = 0; o < p.nOut; o++) out[o] = p.bias[o];
  for (let i = 0; i < p.nIn; i++) {
    const v = input[i];
    for (let o = 0; o < p.nOut; o++) out[o] += v * p.weights[i * p.nOut + o];
  }
  return out;
}

interface ForwardCache {
  side: number;
  x: Float32Array;
  a1: Float32Array; // relu(conv1), full side
  p1: { out: Float32Array; arg: Int32Array; side: number };
  a2: Float32Array;
  p2: { out: Float32Array; arg: Int32Array; side: number };
  a3: Float32Array;
  feat: Float32Array;
  logits: Float32Array;
}

export function forward(net: Net, x: Float32Array, side: number): ForwardCache {
  const a1 = reluInPlace(convForward(x, side, net.conv1));
  const p1 = maxpool2(a1, side, F1);
  const a2 = reluInPlace(convForward(p1.out, p1.side, net.conv2));
  const p2 = maxpool2(a2, p1.side, F2);
  const a3 = reluInPlace(convForward(p2.out, p2.side, net.conv3));
  const feat = gap(a3, p2.side, F3);
  const logits = dense(feat, net.dense);
  return { side, x, a1, p1, a2, p2, a3, feat, logits };
}

export function logits(net: Net, x: Float32Array, side: number): Float32Array {
  return forward(net, x, side).logits;
}

export function argmax(values: Float32Array): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) if (values[i] > values[best]) best = i;
  return best;
}

interface Grads {
  conv1k: Float64Array;
  conv1b: Float64Array;
  conv2k: Float64Array;
  conv2b: Float64Array;
  conv3k: Float64Array;
  conv3b: Float64Array;
  denseW: Float64Array;
  denseB: Float64Array;
}

function zeroGrads(net: Net): Grads {
  return {
    conv1k: new Float64Array(net.conv1.kernel.length),
    conv1b: new Float64Array(net.conv1.bias.length),
    conv2k: new Float64Array(net.conv2.kernel.length),
    conv2b: new Float64Array(net.conv2.bias.length),
    conv3k: new Float64Array(net.conv3.kernel.length),
    conv3b: new Float64Array(net.conv3.bias.length),
    denseW: new Float64Array(net.dense.weights.length),
    denseB: new Float64Array(net.dense.bias.length),
  };
}

/** dKernel/dBias for one conv given dOut; optionally also dInput. */
function convBackward(
  input: Float32Array,
  side: number,
  p: ConvParams,
  dOut: Float64Array,
  dKernel: Float64Array,
  dBias: Float64Array,
  wantDInput: boolean
): Float64Array | null {
  const { kernel, cin, cout } = p;
  const dIn = wantDInput ? new Float64Array(side * side * cin) : null;
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      const base = (r * side + c) * cout;
      for (let co = 0; co < cout; co++) dBias[co] += dOut[base + co];
      for (let kr = -1; kr <= 1; kr++) {
        const rr = r + kr;
        if (rr < 0 || rr >= side) continue;
        for (let kc = -1; kc <= 1; kc++) {
          const cc = c + kc;
          if (cc < 0 || cc >= side) continue;
          const inBase = (rr * side + cc) * cin;
          const kBase = ((kr + 1) * 3 + (kc + 1)) * cin * cout;
          for (let ci = 0; ci < cin; ci++) {
            const v = input[inBase + ci];
            const kk = kBase + ci * cout;
            let acc = 0;
            for (let co = 0; co < cout; co++) {
              const g = dOut[base + co];
              dKernel[kk + co] += v * g;
              if (dIn) acc += kernel[kk + co] * g;
            }
            if (dIn) dIn[inBase + ci] += acc;
          }
        }
      }
    }
  }
  return dIn;
}

function reluBackward(activated: Float32Array, dOut: Float64Array): Float64Array {
  for (let i = 0; i < dOut.length; i++) if (activated[i] <= 0) dOut[i] = 0;
  return dOut;
}

/** Accumulate gradients of softmax cross entropy for one example. */
function backwardExample(net: Net, cache: ForwardCache, label: number, grads: Grads): number {
  const z = cache.logits;
  let maxZ = -Infinity;
  for (const v of z) maxZ = Math.max(maxZ, v);
  let denom = 0;
  const probs = new Float64Array(z.length);
  for (let i = 0; i < z.length; i++) {
    probs[i] = Math.exp(z[i] - maxZ);
    denom += probs[i];
  }
  for (let i = 0; i < z.length; i++) probs[i] /= denom;
  const loss = -Math.log(Math.max(probs[label], 1e-12));

  const dLogits = probs;
  dLogits[label] -= 1;

  // dense
  const dFeat = new Float64Array(net.dense.nIn);
  for (let i = 0; i < net.dense.nIn; i++) {
    const v = cache.feat[i];
    let acc = 0;
    for (let o = 0; o < net.dense.nOut; o++) {
      const g = dLogits[o];
      grads.denseW[i * net.dense.nOut + o] += v * g;
      acc += net.dense.weights[i * net.dense.nOut + o] * g;
    }
    dFeat[i] = acc;
  }
  for (let o = 0; o < net.dense.nOut; o++) grads.denseB[o] += dLogits[o];

  // global average pool
  const side3 = cache.p2.side;
  const n3 = side3 * side3;
  const dA3 = new Float64Array(n3 * F3);
  for (let i = 0; i < n3; i++) {
    for (let k = 0; k < F3; k++) dA3[i * F3 + k] = dFeat[k] / n3;
  }

  // conv3
  reluBackward(cache.a3, dA3);
  const dP2 = convBackward(cache.p2.out, side3, net.conv3, dA3, grads.conv3k, grads.conv3b, true)!;

  // pool2 -> conv2
  const dA2 = new Float64Array(cache.a2.length);
  for (let i = 0; i < dP2.length; i++) dA2[cache.p2.arg[i]] += dP2[i];
  reluBackward(cache.a2, dA2);
  const dP1 = convBackward(cache.p1.out, cache.p1.side, net.conv2, dA2, grads.conv2k, grads.conv2b, true)!;

  // pool1 -> conv1 (no dInput needed at the bottom)
  const dA1 = new Float64Array(cache.a1.length);
  for (let i = 0; i < dP1.length; i++) dA1[cache.p1.arg[i]] += dP1[i];
  reluBackward(cache.a1, dA1);
  convBackward(cache.x, cache.side, net.conv1, dA1, grads.conv1k, grads.conv1b, false);

  return loss;
}

class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(size: number, private lr: number, private beta1 = 0.9, private beta2 = 0.999) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  step(params: Float32Array, grads: Float64Array, scale: number): void {
    this.t++;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < params.length; i++) {
      const g = grads[i] * scale;
      this.m[i] = this.beta1 * this.m[i] + (1 - this.beta1) * g;
      this.v[i] = this.beta2 * this.v[i] + (1 - this.beta2) * g * g;
      const mHat = this.m[i] / c1;
      const vHat = this.v[i] / c2;
      params[i] = Math.fround(params[i] - (this.lr * mHat) / (Math.sqrt(vHat) + 1e-8));
    }
  }
}

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  log?: (msg: string) => void;
}

export function trainNet(
  net: Net,
  images: Float64Array[],
  labels: number[],
  opts: TrainOptions
): { trainAccuracy: number } {
  const { epochs, batchSize, learningRate, log } = opts;
  const n = images.length;
  const xs = images.map((img) => Float32Array.from(img));
  const optimizers = {
    conv1k: new Adam(net.conv1.kernel.length, learningRate),
    conv1b: new Adam(net.conv1.bias.length, learningRate),
    conv2k: new Adam(net.conv2.kernel.length, learningRate),
    conv2b: new Adam(net.conv2.bias.length, learningRate),
    conv3k: new Adam(net.conv3.kernel.length, learningRate),
    conv3b: new Adam(net.conv3.bias.length, learningRate),
    denseW: new Adam(net.dense.weights.length, learningRate),
    denseB: new Adam(net.dense.bias.length, learningRate),
  };

  for (let epoch = 0; epoch < epochs; epoch++) {
    let lossSum = 0;
    for (let start = 0; start < n; start += batchSize) {
      const stop = Math.min(start + batchSize, n);
      const grads = zeroGrads(net);
      for (let i = start; i < stop; i++) {
        const cache = forward(net, xs[i], TRAIN_SIDE);
        lossSum += backwardExample(net, cache, labels[i], grads);
      }
      const scale = 1 / (stop - start);
      optimizers.conv1k.step(net.conv1.kernel, grads.conv1k, scale);
      optimizers.conv1b.step(net.conv1.bias, grads.conv1b, scale);
      optimizers.conv2k.step(net.conv2.kernel, grads.conv2k, scale);
      optimizers.conv2b.step(net.conv2.bias, grads.conv2b, scale);
      optimizers.conv3k.step(net.conv3.kernel, grads.conv3k, scale);
      optimizers.conv3b.step(net.conv3.bias, grads.conv3b, scale);
      optimizers.denseW.step(net.dense.weights, grads.denseW, scale);
      optimizers.denseB.step(net.dense.bias, grads.denseB, scale);
    }
    if (log) log(`epoch ${epoch + 1}/${epochs} mean loss ${(lossSum / n).toFixed(4)}`);
  }

  let hits = 0;
  for (let i = 0; i < n; i++) {
    if (argmax(logits(net, xs[i], TRAIN_SIDE)) === labels[i]) hits++;
  }
  return { trainAccuracy: hits / n };
}

/** Serialize the network as the toolkit's SRW1 layer chain. */
export function toContainer(net: Net): WeightContainer {
  const layers: LayerRecord[] = [
    { kind: "conv2d", kh: 3, kw: 3, cin: CHANNELS, cout: F1, kernel: net.conv1.kernel, bias: net.conv1.bias },
    { kind: "relu" },
    { kind: "maxpool2" },
    { kind: "conv2d", kh: 3, kw: 3, cin: F1, cout: F2, kernel: net.conv2.kernel, bias: net.conv2.bias },
    { kind: "relu" },
    { kind: "maxpool2" },
    { kind: "conv2d", kh: 3, kw: 3, cin: F2, cout: F3, kernel: net.conv3.kernel, bias: net.conv3.bias },
    { kind: "relu" },
    { kind: "globalAvgPool" },
    { kind: "dense", nIn: F3, nOut: NUM_CLASSES, weights: net.dense.weights, bias: net.dense.bias },
  ];
  return { inputShape: [TRAIN_SIDE, TRAIN_SIDE, CHANNELS], layers };
}
