// 3D math for the browser client, matching the reference conventions:
// right-handed axes, radians, quaternions stored (x, y, z, w) composing
// via the Hamilton product (a*b applies b first).

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface Quaternion {
  x: number;
  y: number;
  z: number;
  w: number;
}

export interface EulerAngles {
  phi: number; // about x
  theta: number; // about y
  psi: number; // about z
}

export const X_HAT: Vec3 = { x: 1, y: 0, z: 0 };
export const Y_HAT: Vec3 = { x: 0, y: 1, z: 0 };
export const Z_HAT: Vec3 = { x: 0, y: 0, z: 1 };
export const QUAT_IDENTITY: Quaternion = { x: 0, y: 0, z: 0, w: 1 };

export class GeometryError extends Error {}

export function vec3(x: number, y: number, z: number): Vec3 {
  return { x, y, z };
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return { x: a.x + b.x, y: a.y + b.y, z: a.z + b.z };
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return { x: a.x - b.x, y: a.y - b.y, z: a.z - b.z };
}

export function scale(v: Vec3, s: number): Vec3 {
  return { x: v.x * s, y: v.y * s, z: v.z * s };
}

export function dot(a: Vec3, b: Vec3): number {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return {
    x: a.y * b.z - a.z * b.y,
    y: a.z * b.x - a.x * b.z,
    z: a.x * b.y - a.y * b.x,
  };
}

export function norm(v: Vec3): number {
  return Math.sqrt(dot(v, v));
}

export function normalized(v: Vec3): Vec3 {
  const n = norm(v);
  if (n < 1e-9) throw new GeometryError("cannot normalize near-zero vector");
  return { x: v.x / n, y: v.y / n, z: v.z / n };
}

export function quatNorm(q: Quaternion): number {
  return Math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w);
}

export function isUnitQuat(q: Quaternion, tol = 1e-6): boolean {
  return Math.abs(quatNorm(q) - 1) <= tol;
}

export function quatNormalized(q: Quaternion): Quaternion {
  const n = quatNorm(q);
  if (n < 1e-9) throw new GeometryError("cannot normalize near-zero quaternion");
  return { x: q.x / n, y: q.y / n, z: q.z / n, w: q.w / n };
}

// Hamilton product a*b (applies b first), renormalized.
export function quatMultiply(a: Quaternion, b: Quaternion): Quaternion {
  return quatNormalized({
    x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
    y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
    z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
  });
}

export function rotateVector(q: Quaternion, v: Vec3): Vec3 {
  const tx = 2 * (q.y * v.z - q.z * v.y);
  const ty = 2 * (q.z * v.x - q.x * v.z);
  const tz = 2 * (q.x * v.y - q.y * v.x);
  return {
    x: v.x + q.w * tx + (q.y * tz - q.z * ty),
    y: v.y + q.w * ty + (q.z * tx - q.x * tz),
    z: v.z + q.w * tz + (q.x * ty - q.y * tx),
  };
}

// Minimal-arc rotation taking direction a to direction b; antipodal
// inputs get a deterministic 180-degree turn.
export function quaternionBetween(a: Vec3, b: Vec3): Quaternion {
  const u = normalized(a);
  const v = normalized(b);
  const d = dot(u, v);
  if (d < -1 + 1e-6) {
    const ref = Math.abs(dot(u, Y_HAT)) < 0.9 ? Y_HAT : Z_HAT;
    const axis = normalized(cross(u, ref));
    return { x: axis.x, y: axis.y, z: axis.z, w: 0 };
  }
  const c = cross(u, v);
  return quatNormalized({ x: c.x, y: c.y, z: c.z, w: 1 + d });
}

// Quaternion for the extrinsic x-y-z rotation q_z * q_y * q_x.
export function eulerToQuaternion(angles: EulerAngles): Quaternion {
  const cx = Math.cos(0.5 * angles.phi);
  const sx = Math.sin(0.5 * angles.phi);
  const cy = Math.cos(0.5 * angles.theta);
  const sy = Math.sin(0.5 * angles.theta);
  const cz = Math.cos(0.5 * angles.psi);
  const sz = Math.sin(0.5 * angles.psi);
  return {
    x: sx * cy * cz - cx * sy * sz,
    y: cx * sy * cz + sx * cy * sz,
    z: cx * cy * sz - sx * sy * cz,
    w: cx * cy * cz + sx * sy * sz,
  };
}

// Rotation matrix (row-major 9 entries) with the same action as
// rotateVector(q, .).
export function quaternionToMatrix(q: Quaternion): number[] {
  const { x, y, z, w } = q;
  return [
    1 - 2 * (y * y + z * z),
    2 * (x * y - z * w),
    2 * (x * z + y * w),
    2 * (x * y + z * w),
    1 - 2 * (x * x + z * z),
    2 * (y * z - x * w),
    2 * (x * z - y * w),
    2 * (y * z + x * w),
    1 - 2 * (x * x + y * y),
  ];
}

// Recover extrinsic x-y-z angles from a rotation quaternion: the
// inverse of eulerToQuaternion up to the principal ranges
// phi, psi in (-pi, pi], theta in [-pi/2, pi/2].
export function quaternionToEuler(q: Quaternion): EulerAngles {
  const m = quaternionToMatrix(q);
  const sy = -m[6]; // -r20 = sin(theta)
  if (Math.abs(sy) > 1 - 1e-12) {
    // gimbal: fold psi into phi
    return {
      phi: Math.atan2(-m[5], m[4]),
      theta: sy > 0 ? Math.PI / 2 : -Math.PI / 2,
      psi: 0,
    };
  }
  return {
    phi: Math.atan2(m[7], m[8]),
    theta: Math.asin(sy),
    psi: Math.atan2(m[3], m[0]),
  };
}
