/**
 * Spectral-residual saliency, numerically mirroring the attack toolkit's
 * built-in method: Rec.601 luma, align-corners bilinear resize to 64x64,
 * mean removal, FFT, log-amplitude minus its 3x3 box mean (replicated
 * edges, relative amplitude floor 1e-3), inverse FFT of the residual with
 * the original phase, squared magnitude, Gaussian smoothing (sigma 2.5,
 * radius 10, reflected edges), upscale, and peak normalization.
 */

const WORK_SIDE = 64;
const AMP_FLOOR = 1e-3;
const GAUSS_SIGMA = 2.5;

export function luma(pixels: Float64Array, side: number): Float64Array {
  const out = new Float64Array(side * side);
  for (let i = 0; i < side * side; i++) {
    out[i] = 0.299 * pixels[i * 3] + 0.587 * pixels[i * 3 + 1] + 0.114 * pixels[i * 3 + 2];
  }
  return out;
}

/** Align-corners bilinear resize of a square 2-D field. */
export function resizeBilinear(src: Float64Array, srcSide: number, dstSide: number): Float64Array {
  const out = new Float64Array(dstSide * dstSide);
  const coord = (i: number) =>
    dstSide === 1 ? (srcSide - 1) / 2 : (i * (srcSide - 1)) / (dstSide - 1);
  for (let r = 0; r < dstSide; r++) {
    const y = coord(r);
    const y0 = Math.min(Math.floor(y), srcSide - 1);
    const y1 = Math.min(y0 + 1, srcSide - 1);
    const fy = y - y0;
    for (let c = 0; c < dstSide; c++) {
      const x = coord(c);
      const x0 = Math.min(Math.floor(x), srcSide - 1);
      const x1 = Math.min(x0 + 1, srcSide - 1);
      const fx = x - x0;
      const v00 = src[y0 * srcSide + x0];
      const v01 = src[y0 * srcSide + x1];
      const v10 = src[y1 * srcSide + x0];
      const v11 = src[y1 * srcSide + x1];
      out[r * dstSide + c] =
        v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) + v11 * fy * fx;
    }
  }
  return out;
}

/** In-place radix-2 Cooley-Tukey; scales by 1/n on the inverse. */
function fft1d(re: Float64Array, im: Float64Array, invert: boolean): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) throw new Error("fft length must be a power of two");
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = ((invert ? 2 : -2) * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
  if (invert) {
    for (let i = 0; i < n; i++) {
      re[i] /= n;
      im[i] /= n;
    }
  }
}

function fft2d(re: Float64Array, im: Float64Array, side: number, invert: boolean): void {
  const rowRe = new Float64Array(side);
  const rowIm = new Float64Array(side);
  for (let r = 0; r < side; r++) {
    rowRe.set(re.subarray(r * side, (r + 1) * side));
    rowIm.set(im.subarray(r * side, (r + 1) * side));
    fft1d(rowRe, rowIm, invert);
    re.set(rowRe, r * side);
    im.set(rowIm, r * side);
  }
  const colRe = new Float64Array(side);
  const colIm = new Float64Array(side);
  for (let c = 0; c < side; c++) {
    for (let r = 0; r < side; r++) {
      colRe[r] = re[r * side + c];
      colIm[r] = im[r * side + c];
    }
    fft1d(colRe, colIm, invert);
    for (let r = 0; r < side; r++) {
      re[r * side + c] = colRe[r];
      im[r * side + c] = colIm[r];
    }
  }
}

/** 3x3 box mean with replicated edges (mode "nearest"). */
function boxFilter3(src: Float64Array, side: number): Float64Array {
  const out = new Float64Array(side * side);
  const at = (r: number, c: number) => {
    const rr = Math.min(side - 1, Math.max(0, r));
    const cc = Math.min(side - 1, Math.max(0, c));
    return src[rr * side + cc];
  };
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      let sum = 0;
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) sum += at(r + dr, c + dc);
      }
      out[r * side + c] = sum / 9;
    }
  }
  return out;
}

/** Separable Gaussian with half-sample reflected edges (radius 4*sigma). */
function gaussianFilter(src: Float64Array, side: number, sigma: number): Float64Array {
  const radius = Math.floor(4 * sigma + 0.5);
  const kernel = new Float64Array(2 * radius + 1);
  let total = 0;
  for (let i = -radius; i <= radius; i++) {
    const w = Math.exp(-0.5 * (i / sigma) ** 2);
    kernel[i + radius] = w;
    total += w;
  }
  for (let i = 0; i < kernel.length; i++) kernel[i] /= total;

  const reflect = (i: number) => {
    let j = i;
    const period = 2 * side;
    j = ((j % period) + period) % period;
    return j < side ? j : period - 1 - j;
  };

  const tmp = new Float64Array(side * side);
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) acc += kernel[k + radius] * src[r * side + reflect(c + k)];
      tmp[r * side + c] = acc;
    }
  }
  const out = new Float64Array(side * side);
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) acc += kernel[k + radius] * tmp[reflect(r + k) * side + c];
      out[r * side + c] = acc;
    }
  }
  return out;
}

/** Balanced pairwise sum: exact for power-of-two runs of equal values. */
function pairwiseSum(values: Float64Array, lo: number, hi: number): number {
  const n = hi - lo;
  if (n === 1) return values[lo];
  if (n === 2) return values[lo] + values[lo + 1];
  const mid = lo + (n >> 1);
  return pairwiseSum(values, lo, mid) + pairwiseSum(values, mid, hi);
}

/** Saliency scores in [0,1] for an RGB image (row-major floats in [0,1]). */
export function spectralResidual(pixels: Float64Array, side: number): Float64Array {
  const gray = luma(pixels, side);
  const small = resizeBilinear(gray, side, WORK_SIDE);
  // float32 pass mirrors the toolkit's resize output dtype; together with
  // the pairwise mean it makes a constant image cancel to exact zeros
  for (let i = 0; i < small.length; i++) small[i] = Math.fround(small[i]);
  const mean = pairwiseSum(small, 0, small.length) / small.length;
  const re = new Float64Array(WORK_SIDE * WORK_SIDE);
  const im = new Float64Array(WORK_SIDE * WORK_SIDE);
  for (let i = 0; i < small.length; i++) re[i] = small[i] - mean;

  fft2d(re, im, WORK_SIDE, false);
  const n = WORK_SIDE * WORK_SIDE;
  const amp = new Float64Array(n);
  let peak = 0;
  for (let i = 0; i < n; i++) {
    amp[i] = Math.hypot(re[i], im[i]);
    if (amp[i] > peak) peak = amp[i];
  }
  if (peak === 0) return new Float64Array(side * side);

  const logAmp = new Float64Array(n);
  for (let i = 0; i < n; i++) logAmp[i] = Math.log(Math.max(amp[i], peak * AMP_FLOOR));
  const smoothed = boxFilter3(logAmp, WORK_SIDE);

  for (let i = 0; i < n; i++) {
    const mag = Math.exp(logAmp[i] - smoothed[i]);
    const phase = Math.atan2(im[i], re[i]);
    re[i] = mag * Math.cos(phase);
    im[i] = mag * Math.sin(phase);
  }
  fft2d(re, im, WORK_SIDE, true);

  let energy: Float64Array = new Float64Array(n);
  let eMax = 0;
  for (let i = 0; i < n; i++) {
    energy[i] = re[i] * re[i] + im[i] * im[i];
    }
  energy = gaussianFilter(energy, WORK_SIDE, GAUSS_SIGMA);
  for (const v of energy) if (v > eMax) eMax = v;
  if (eMax <= 0) return new Float64Array(side * side);
  for (let i = 0; i < n; i++) energy[i] = Math.max(energy[i], 0) / eMax;

  const scores = resizeBilinear(energy, WORK_SIDE, side);
  let top = 0;
  for (let i = 0; i < scores.length; i++) {
    scores[i] = Math.min(1, Math.max(0, scores[i]));
    if (scores[i] > top) top = scores[i];
  }
  if (top === 0) return new Float64Array(side * side);
  for (let i = 0; i < scores.length; i++) scores[i] /= top;
  return scores;
}
