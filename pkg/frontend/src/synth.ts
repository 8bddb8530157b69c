// Synthetic landmark animation for when no recording is loaded. Same
// canonical face as the desktop generator: 468 points on an ellipsoid
// patch in a 26 x 18 grid with the four semantic landmarks pinned.

import { CENTER_NOSE, LEFT_EYELASH, LOWER_NOSE, RIGHT_EYELASH } from "./calibration.js";
import { LANDMARK_COUNT } from "./wire.js";

export const GRID_COLS = 26;
export const GRID_ROWS = 18;

export type MotionKind = "still" | "nod" | "shake" | "orbit";
export const MOTIONS: MotionKind[] = ["still", "nod", "shake", "orbit"];

const PINNED: Array<[number, number, number, number]> = [
  [CENTER_NOSE, 0, 0, 0],
  [LOWER_NOSE, 0, -0.5, 0],
  [LEFT_EYELASH, -0.5, 0.5, 0],
  [RIGHT_EYELASH, 0.5, 0.5, 0],
];

export function canonicalFace(): Float64Array {
  const points = new Float64Array(LANDMARK_COUNT * 3);
  for (let r = 0; r < GRID_ROWS; r++) {
    for (let c = 0; c < GRID_COLS; c++) {
      const u = c / (GRID_COLS - 1) - 0.5;
      const v = r / (GRID_ROWS - 1) - 0.5;
      const az = u * Math.PI * 0.8;
      const el = v * Math.PI * 0.7;
      const i = (r * GRID_COLS + c) * 3;
      points[i] = 0.6 * Math.sin(az) * Math.cos(el);
      points[i + 1] = 0.8 * Math.sin(el);
      points[i + 2] = 0.45 * Math.cos(az) * Math.cos(el) - 0.25;
    }
  }
  for (const [idx, x, y, z] of PINNED) {
    points[idx * 3] = x;
    points[idx * 3 + 1] = y;
    points[idx * 3 + 2] = z;
  }
  return points;
}

// Two triangles per grid cell, wound counter-clockwise seen from +z.
export function gridTessellation(): Array<[number, number, number]> {
  const triangles: Array<[number, number, number]> = [];
  for (let r = 0; r < GRID_ROWS - 1; r++) {
    for (let c = 0; c < GRID_COLS - 1; c++) {
      const a = r * GRID_COLS + c;
      const b = a + 1;
      const d = a + GRID_COLS;
      const e = d + 1;
      triangles.push([a, b, d]);
      triangles.push([b, e, d]);
    }
  }
  return triangles;
}

export interface MotionOptions {
  amplitudeDeg?: number;
  periodS?: number;
  orbitRadius?: number;
}

// Rigid motion of the canonical face at time t (seconds). The phase is
// a sine, so t = 0 is always the exact canonical pose.
export function motionFrame(kind: MotionKind, t: number, options: MotionOptions = {}): Float64Array {
  const amplitude = ((options.amplitudeDeg ?? 20) * Math.PI) / 180;
  const period = options.periodS ?? 2;
  const orbitRadius = options.orbitRadius ?? 0.3;
  const base = canonicalFace();
  if (kind === "still") return base;

  const out = new Float64Array(base.length);
  if (kind === "orbit") {
    const angle = (2 * Math.PI * t) / period;
    const dx = orbitRadius * (Math.cos(angle) - 1);
    const dy = orbitRadius * Math.sin(angle);
    for (let i = 0; i < base.length; i += 3) {
      out[i] = base[i] + dx;
      out[i + 1] = base[i + 1] + dy;
      out[i + 2] = base[i + 2];
    }
    return out;
  }

  const phase = Math.sin((2 * Math.PI * t) / period);
  const angle = amplitude * phase;
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  if (kind === "nod") {
    // pitch about x
    for (let i = 0; i < base.length; i += 3) {
      out[i] = base[i];
      out[i + 1] = c * base[i + 1] - s * base[i + 2];
      out[i + 2] = s * base[i + 1] + c * base[i + 2];
    }
  } else {
    // yaw about y
    for (let i = 0; i < base.length; i += 3) {
      out[i] = c * base[i] + s * base[i + 2];
      out[i + 1] = base[i + 1];
      out[i + 2] = -s * base[i] + c * base[i + 2];
    }
  }
  return out;
}

export interface SynthFrame {
  timestampMs: number;
  coords: Float64Array;
}

export function generateFrames(
  kind: MotionKind,
  frames: number,
  fps = 30,
  options: MotionOptions = {},
): SynthFrame[] {
  if (frames < 1) throw new Error("need at least one frame");
  const out: SynthFrame[] = [];
  for (let i = 0; i < frames; i++) {
    out.push({
      timestampMs: Math.round((i * 1000) / fps),
      coords: motionFrame(kind, i / fps, options),
    });
  }
  return out;
}
