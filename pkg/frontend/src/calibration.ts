// Face calibration and the text file formats shared with the desktop
// tooling: key=value calibration profiles and landmark recordings.

import {
  Quaternion,
  QUAT_IDENTITY,
  Vec3,
  X_HAT,
  Y_HAT,
  cross,
  isUnitQuat,
  norm,
  normalized,
  quatMultiply,
  quatNorm,
  quaternionBetween,
  quaternionToMatrix,
  rotateVector,
  sub,
  vec3,
} from "./geometry.js";
import { LANDMARK_COUNT } from "./wire.js";

export const PROFILE_VERSION = 1;

export const LOWER_NOSE = 1;
export const CENTER_NOSE = 5;
export const LEFT_EYELASH = 52;
export const RIGHT_EYELASH = 282;

export class CalibrationError extends Error {}
export class DegenerateFrame extends CalibrationError {}
export class MalformedProfile extends CalibrationError {}
export class UnreadableRecording extends CalibrationError {}

export interface CalibrationState {
  translation: Vec3;
  rotation: Quaternion;
  scale: number;
}

export const IDENTITY_CALIBRATION: CalibrationState = {
  translation: { x: 0, y: 0, z: 0 },
  rotation: QUAT_IDENTITY,
  scale: 1,
};

export interface RecordedFrame {
  timestampMs: number;
  coords: Float64Array; // 1404 values, x y z interleaved
}

function landmark(coords: Float64Array, index: number): Vec3 {
  const base = index * 3;
  return vec3(coords[base], coords[base + 1], coords[base + 2]);
}

function allFinite(coords: Float64Array): boolean {
  for (let i = 0; i < coords.length; i++) {
    if (!Number.isFinite(coords[i])) return false;
  }
  return true;
}

export function computeUp(coords: Float64Array): Vec3 {
  const left = landmark(coords, LEFT_EYELASH);
  const right = landmark(coords, RIGHT_EYELASH);
  const mid = vec3(0.5 * (left.x + right.x), 0.5 * (left.y + right.y), 0.5 * (left.z + right.z));
  return sub(mid, landmark(coords, LOWER_NOSE));
}

export function computeRight(coords: Float64Array): Vec3 {
  return sub(landmark(coords, RIGHT_EYELASH), landmark(coords, LEFT_EYELASH));
}

// Outward unit normal of the eyelash-nose triangle; +z for a
// calibrated face.
export function faceNormal(coords: Float64Array): Vec3 {
  return normalized(cross(computeRight(coords), computeUp(coords)));
}

// Measure the rigid correction for an initial frame: recenter the
// center nose, then align right to +x and the rotated up to +y via two
// sequential minimal arcs. Scale stays a user knob at 1.
export function calibrate(coords: Float64Array): CalibrationState {
  if (coords.length !== LANDMARK_COUNT * 3) {
    throw new DegenerateFrame(`expected ${LANDMARK_COUNT * 3} coordinates`);
  }
  if (!allFinite(coords)) throw new DegenerateFrame("calibrate needs finite landmarks");
  const up = computeUp(coords);
  const right = computeRight(coords);
  if (norm(up) < 1e-9 || norm(right) < 1e-9) {
    throw new DegenerateFrame("up/right directions collapsed");
  }
  const qRight = quaternionBetween(right, X_HAT);
  const qUp = quaternionBetween(rotateVector(qRight, normalized(up)), Y_HAT);
  const nose = landmark(coords, CENTER_NOSE);
  return {
    translation: vec3(-nose.x, -nose.y, -nose.z),
    rotation: quatMultiply(qUp, qRight),
    scale: 1,
  };
}

// Apply to every point: scale * R(p + t).
export function applyCalibration(state: CalibrationState, coords: Float64Array): Float64Array {
  const m = quaternionToMatrix(state.rotation);
  const t = state.translation;
  const s = state.scale;
  const out = new Float64Array(coords.length);
  for (let i = 0; i < coords.length; i += 3) {
    const x = coords[i] + t.x;
    const y = coords[i + 1] + t.y;
    const z = coords[i + 2] + t.z;
    out[i] = s * (m[0] * x + m[1] * y + m[2] * z);
    out[i + 1] = s * (m[3] * x + m[4] * y + m[5] * z);
    out[i + 2] = s * (m[6] * x + m[7] * y + m[8] * z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// calibration profile documents
//
// Key=value text, one field per line, version field mandatory. Numbers
// are written with shortest-roundtrip formatting on both sides, so
// profiles exchange cleanly with the desktop tools.

function formatFloat(v: number): string {
  // Integral floats print bare in JS ("2") where the desktop side
  // writes "2.0"; keep the fraction so both parsers see the same text.
  if (Number.isInteger(v) && Math.abs(v) < 1e16) {
    return Object.is(v, -0) ? "-0.0" : `${v}.0`;
  }
  return String(v);
}

export function saveCalibration(state: CalibrationState): string {
  const t = state.translation;
  const r = state.rotation;
  return (
    `version=${PROFILE_VERSION}\n` +
    `translation=${formatFloat(t.x)} ${formatFloat(t.y)} ${formatFloat(t.z)}\n` +
    `rotation=${formatFloat(r.x)} ${formatFloat(r.y)} ${formatFloat(r.z)} ${formatFloat(r.w)}\n` +
    `scale=${formatFloat(state.scale)}\n`
  );
}

function parseFloatStrict(text: string): number {
  if (!/^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/.test(text) && !/^[+-]?(inf(inity)?|nan)$/i.test(text)) {
    throw new MalformedProfile(`not a number: ${JSON.stringify(text)}`);
  }
  const v = Number(text.replace(/inf(inity)?/i, "Infinity").replace(/nan/i, "NaN"));
  return v;
}

export function loadCalibration(doc: string): CalibrationState {
  const fields = new Map<string, string>();
  const lines = doc.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new MalformedProfile(`line ${i + 1}: expected key=value`);
    fields.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  }

  if (fields.get("version") !== String(PROFILE_VERSION)) {
    throw new MalformedProfile(`unsupported profile version ${JSON.stringify(fields.get("version"))}`);
  }

  const floats = (key: string, count: number): number[] => {
    const raw = fields.get(key);
    if (raw === undefined) throw new MalformedProfile(`missing field ${key}`);
    const parts = raw.split(/\s+/).filter((p) => p.length > 0);
    if (parts.length !== count) throw new MalformedProfile(`field ${key} needs ${count} numbers`);
    const values = parts.map(parseFloatStrict);
    if (!values.every(Number.isFinite)) throw new MalformedProfile(`field ${key}: non-finite value`);
    return values;
  };

  const [tx, ty, tz] = floats("translation", 3);
  const [qx, qy, qz, qw] = floats("rotation", 4);
  const [scale] = floats("scale", 1);
  const rotation = { x: qx, y: qy, z: qz, w: qw };
  if (!isUnitQuat(rotation)) {
    throw new MalformedProfile(`rotation norm ${quatNorm(rotation)}`);
  }
  if (scale <= 0) throw new MalformedProfile(`scale must be positive, got ${scale}`);
  return { translation: vec3(tx, ty, tz), rotation, scale };
}

// ---------------------------------------------------------------------------
// landmark recordings
//
// Header "landmark_count=468", then one line per frame:
// "<timestamp_ms> <1404 reals>", coordinates x y z per landmark.

export function parseRecording(text: string): RecordedFrame[] {
  const lines = text.split("\n");
  const header = (lines[0] ?? "").trim();
  if (header !== `landmark_count=${LANDMARK_COUNT}`) {
    throw new UnreadableRecording(`bad recording header ${JSON.stringify(header)}`);
  }
  const frames: RecordedFrame[] = [];
  for (let i = 1; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    const parts = lines[i].trim().split(/\s+/);
    if (parts.length !== 1 + LANDMARK_COUNT * 3) {
      throw new UnreadableRecording(
        `line ${i + 1}: expected ${1 + LANDMARK_COUNT * 3} fields, got ${parts.length}`,
      );
    }
    const ts = Number(parts[0]);
    if (!Number.isInteger(ts)) throw new UnreadableRecording(`line ${i + 1}: bad timestamp`);
    const coords = new Float64Array(LANDMARK_COUNT * 3);
    for (let j = 0; j < coords.length; j++) {
      const v = Number(parts[j + 1]);
      if (Number.isNaN(v) && parts[j + 1].toLowerCase() !== "nan") {
        throw new UnreadableRecording(`line ${i + 1}: bad number ${JSON.stringify(parts[j + 1])}`);
      }
      coords[j] = v;
    }
    frames.push({ timestampMs: ts, coords });
  }
  return frames;
}

export function formatRecording(frames: Iterable<RecordedFrame>): string {
  const out = [`landmark_count=${LANDMARK_COUNT}`];
  for (const frame of frames) {
    const flat = Array.from(frame.coords, formatFloat).join(" ");
    out.push(`${frame.timestampMs} ${flat}`);
  }
  return out.join("\n") + "\n";
}
