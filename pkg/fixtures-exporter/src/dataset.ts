/**
 * Procedural 10-class shape dataset.
 *
 * Each sample is a single soft-edged glyph (circle, ring, square, square
 * outline, triangle, plus, diagonal cross, double horizontal bars, double
 * vertical bars, diamond) over a gently shaded background, with per-sample
 * jitter of position, size, contrast and noise.  All geometry is relative
 * to the canvas side, so the same generator renders any resolution.
 */

import { Rng } from "./rng";

export const NUM_CLASSES = 10;
export const CLASS_NAMES = [
  "circle",
  "ring",
  "square",
  "square_outline",
  "triangle",
  "plus",
  "cross",
  "h_bars",
  "v_bars",
  "diamond",
];

interface SampleParams {
  cx: number;
  cy: number;
  r: number;
  thick: number;
  fg: [number, number, number];
  bg: [number, number, number];
  gradSlope: number;
  gradAngle: number;
  noiseSd: number;
}

function drawParams(rng: Rng): SampleParams {
  // dark glyph on a lighter background: consistent edge polarity keeps the
  // task learnable for a very small network
  const bg = rng.uniform(0.55, 0.85);
  const contrast = rng.uniform(0.25, 0.5);
  const tint = () => rng.uniform(-0.03, 0.03);
  return {
    cx: 0.5 + rng.uniform(-0.06, 0.06),
    cy: 0.5 + rng.uniform(-0.06, 0.06),
    r: rng.uniform(0.19, 0.29),
    thick: rng.uniform(0.055, 0.09),
    fg: [bg - contrast + tint(), bg - contrast + tint(), bg - contrast + tint()],
    bg: [bg + tint(), bg + tint(), bg + tint()],
    gradSlope: rng.uniform(-0.07, 0.07),
    gradAngle: rng.uniform(0, Math.PI),
    noiseSd: rng.uniform(0.008, 0.02),
  };
}

/** Max half-plane distance to a convex polygon centered at the origin. */
function polyDistance(px: number, py: number, verts: Array<[number, number]>): number {
  let d = -Infinity;
  for (let i = 0; i < verts.length; i++) {
    const [x1, y1] = verts[i];
    const [x2, y2] = verts[(i + 1) % verts.length];
    let nx = y2 - y1;
    let ny = -(x2 - x1);
    const len = Math.hypot(nx, ny);
    nx /= len;
    ny /= len;
    const mx = (x1 + x2) / 2;
    const my = (y1 + y2) / 2;
    if (nx * mx + ny * my < 0) {
      nx = -nx;
      ny = -ny;
    }
    d = Math.max(d, (px - x1) * nx + (py - y1) * ny);
  }
  return d;
}

/** Signed distance (negative inside) of each glyph class, unit coords. */
function glyphDistance(cls: number, u: number, v: number, p: SampleParams): number {
  const dx = u - p.cx;
  const dy = v - p.cy;
  const abs = Math.abs;
  switch (cls) {
    case 0: // filled circle
      return Math.hypot(dx, dy) - p.r;
    case 1: // ring
      return abs(Math.hypot(dx, dy) - p.r) - p.thick;
    case 2: // filled square
      return Math.max(abs(dx), abs(dy)) - p.r;
    case 3: // square outline
      return abs(Math.max(abs(dx), abs(dy)) - p.r) - p.thick;
    case 4: {
      // upward triangle (vertex toward the top of the image)
      const r = p.r * 1.15;
      return polyDistance(dx, dy, [
        [0, -r],
        [-0.866 * r, 0.5 * r],
        [0.866 * r, 0.5 * r],
      ]);
    }
    case 5: {
      // plus: union of a horizontal and a vertical bar
      const barH = Math.max(abs(dx) - p.r, abs(dy) - p.thick);
      const barV = Math.max(abs(dx) - p.thick, abs(dy) - p.r);
      return Math.min(barH, barV);
    }
    case 6: {
      // diagonal cross: the plus rotated 45 degrees
      const rx = (dx + dy) * Math.SQRT1_2;
      const ry = (dy - dx) * Math.SQRT1_2;
      const barH = Math.max(abs(rx) - p.r, abs(ry) - p.thick);
      const barV = Math.max(abs(rx) - p.thick, abs(ry) - p.r);
      return Math.min(barH, barV);
    }
    case 7: {
      // two horizontal bars
      const off = p.r * 0.6;
      const bar = (cy: number) => Math.max(abs(dx) - p.r, abs(dy - cy) - p.thick * 0.8);
      return Math.min(bar(-off), bar(off));
    }
    case 8: {
      // two vertical bars
      const off = p.r * 0.6;
      const bar = (cx: number) => Math.max(abs(dx - cx) - p.thick * 0.8, abs(dy) - p.r);
      return Math.min(bar(-off), bar(off));
    }
    case 9: // diamond
      return (abs(dx) + abs(dy)) - p.r;
    default:
      throw new Error(`unknown class ${cls}`);
  }
}

/** Render one sample as row-major [side][side][3] floats in [0,1]. */
export function renderSample(cls: number, side: number, rng: Rng): Float64Array {
  const p = drawParams(rng);
  const soft = 1.2 / side;
  const out = new Float64Array(side * side * 3);
  const gx = Math.cos(p.gradAngle);
  const gy = Math.sin(p.gradAngle);
  for (let row = 0; row < side; row++) {
    for (let col = 0; col < side; col++) {
      const u = (col + 0.5) / side;
      const v = (row + 0.5) / side;
      const d = glyphDistance(cls, u, v, p);
      const alpha = Math.min(1, Math.max(0, 0.5 - d / soft));
      const shade = p.gradSlope * ((u - 0.5) * gx + (v - 0.5) * gy);
      for (let ch = 0; ch < 3; ch++) {
        const base = p.bg[ch] + shade;
        const val = base * (1 - alpha) + p.fg[ch] * alpha + rng.normal(0, p.noiseSd);
        out[(row * side + col) * 3 + ch] = Math.min(1, Math.max(0, val));
      }
    }
  }
  return out;
}

export interface Split {
  images: Float64Array[];
  labels: number[];
}

/** Balanced split: classes cycle round-robin before shuffling. */
export function buildSplit(n: number, side: number, rng: Rng): Split {
  const order = rng.shuffle(Array.from({ length: n }, (_, i) => i % NUM_CLASSES));
  return {
    images: order.map((cls) => renderSample(cls, side, rng)),
    labels: order,
  };
}
