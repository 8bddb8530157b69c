// Mesh frame wire format. Byte-compatible with the reference
// implementation: 16-byte header (magic "MW", version, flags, u32
// sequence, u64 timestamp, all little-endian), 468x3 coordinate halfs,
// 7 pose halfs. Always exactly 2838 bytes.
//
// Half conversion truncates the mantissa, never rounds, so decoded
// values are biased toward zero and within one truncation ulp.

export const LANDMARK_COUNT = 468;
export const HEADER_SIZE = 16;
export const FRAME_SIZE = HEADER_SIZE + LANDMARK_COUNT * 3 * 2 + 7 * 2; // 2838

export const VERSION = 1;
export const FLAG_NONFINITE = 0x01; // some coordinate was NaN or infinite
export const FLAG_END_OF_STREAM = 0x02; // sender's final packet

export class WireError extends Error {}
export class WrongLandmarkCount extends WireError {}
export class BadLength extends WireError {}
export class BadMagic extends WireError {}
export class BadVersion extends WireError {}

const scratch = new DataView(new ArrayBuffer(8));

export function f64ToF16(x: number): number {
  scratch.setFloat64(0, x);
  const hi = scratch.getUint32(0);
  const sign = (hi >>> 16) & 0x8000;
  if (Number.isNaN(x)) return sign | 0x7e00;
  const a = Math.abs(x);
  if (a >= 65536) return sign | 0x7c00;
  if (a >= 2 ** -14) {
    // top 21 bits of the magnitude are the double's exponent plus the
    // ten mantissa bits the half keeps; rebias 1023 -> 15
    return sign | (((hi & 0x7fffffff) >>> 10) - (1008 << 10));
  }
  // subnormal halfs sit on the 2^-24 lattice; floor of a positive
  // value is truncation toward zero, and the scaling is exact
  return sign | Math.floor(a * 16777216);
}

export function f16ToF64(h: number): number {
  const sign = h & 0x8000 ? -1 : 1;
  const exp = (h >>> 10) & 0x1f;
  const mant = h & 0x3ff;
  if (exp === 0x1f) return mant !== 0 ? NaN : sign * Infinity;
  if (exp === 0) return sign * mant * 2 ** -24;
  return sign * (1024 + mant) * 2 ** (exp - 25);
}

export interface MeshPose {
  translation: [number, number, number];
  rotation: [number, number, number, number]; // quaternion x y z w
}

export const IDENTITY_POSE: MeshPose = {
  translation: [0, 0, 0],
  rotation: [0, 0, 0, 1],
};

export interface DecodedFrame {
  coords: Float64Array; // length 1404, x y z interleaved
  pose: MeshPose;
  sequence: number;
  timestampMs: number;
  flags: number;
  endOfStream: boolean;
}

export function encodeFrame(
  coords: Float64Array,
  pose: MeshPose = IDENTITY_POSE,
  sequence = 0,
  timestampMs = 0,
  flags = 0,
): Uint8Array {
  if (coords.length !== LANDMARK_COUNT * 3) {
    throw new WrongLandmarkCount(
      `expected ${LANDMARK_COUNT * 3} coordinates, got ${coords.length}`,
    );
  }
  for (let i = 0; i < coords.length; i++) {
    if (!Number.isFinite(coords[i])) {
      flags |= FLAG_NONFINITE;
      break;
    }
  }
  const out = new Uint8Array(FRAME_SIZE);
  const view = new DataView(out.buffer);
  out[0] = 0x4d; // "M"
  out[1] = 0x57; // "W"
  out[2] = VERSION;
  out[3] = flags & 0xff;
  view.setUint32(4, sequence >>> 0, true);
  view.setBigUint64(8, BigInt(Math.round(timestampMs)), true);
  let off = HEADER_SIZE;
  for (let i = 0; i < coords.length; i++, off += 2) {
    view.setUint16(off, f64ToF16(coords[i]), true);
  }
  for (const v of pose.translation) {
    view.setUint16(off, f64ToF16(v), true);
    off += 2;
  }
  for (const v of pose.rotation) {
    view.setUint16(off, f64ToF16(v), true);
    off += 2;
  }
  return out;
}

export function decodeFrame(data: Uint8Array): DecodedFrame {
  if (data.length !== FRAME_SIZE) {
    throw new BadLength(`packet is ${data.length} bytes, expected ${FRAME_SIZE}`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (data[0] !== 0x4d || data[1] !== 0x57) {
    throw new BadMagic(`bad magic ${data[0]},${data[1]}`);
  }
  if (data[2] !== VERSION) throw new BadVersion(`unsupported version ${data[2]}`);
  const flags = data[3];
  const sequence = view.getUint32(4, true);
  const timestampMs = Number(view.getBigUint64(8, true));
  const coords = new Float64Array(LANDMARK_COUNT * 3);
  let off = HEADER_SIZE;
  for (let i = 0; i < coords.length; i++, off += 2) {
    coords[i] = f16ToF64(view.getUint16(off, true));
  }
  const tail: number[] = [];
  for (let i = 0; i < 7; i++, off += 2) tail.push(f16ToF64(view.getUint16(off, true)));
  return {
    coords,
    pose: {
      translation: [tail[0], tail[1], tail[2]],
      rotation: [tail[3], tail[4], tail[5], tail[6]],
    },
    sequence,
    timestampMs,
    flags,
    endOfStream: (flags & FLAG_END_OF_STREAM) !== 0,
  };
}

// -- pacing and budgets -------------------------------------------------------

// A send is permitted when the frame interval has passed, with 1 ms of
// scheduler slack; the very first frame (no previous send) always may.
// Callers drop (coalesce) otherwise.
export function pace(nowMs: number, lastSentMs: number | null, fpsCap: number): boolean {
  if (fpsCap <= 0) return false;
  if (lastSentMs === null) return true;
  return nowMs - lastSentMs >= 1000 / fpsCap - 1;
}

export interface RateBudget {
  fpsCap: number;
  bytesPerFrame: number;
  bytesPerSecond: number;
}

export function budget(fpsCap: number, bytesPerFrame = FRAME_SIZE): RateBudget {
  if (fpsCap < 0 || bytesPerFrame < 0) throw new WireError("budget inputs must be non-negative");
  return { fpsCap, bytesPerFrame, bytesPerSecond: fpsCap * bytesPerFrame };
}
