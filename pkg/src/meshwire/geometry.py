"""3D math core: vectors, homogeneous transforms, reduced-form perspective
projection, and Euler/quaternion rotation algebra.

Conventions used throughout the package:

* column vectors, matrices act from the left, row-major storage
* right-handed axes, angles in radians, positive = counter-clockwise
  looking down the axis toward the origin
* quaternions are stored (x, y, z, w) and compose via the Hamilton
  product, so ``a * b`` applies ``b`` first
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Projection denominators smaller than this are treated as degenerate.
W_EPS = 1e-12

# Unit-input dot products below -1 + this use the antipodal fallback.
ANTIPODAL_EPS = 1e-6

_UNIT_TOL = 1e-6


class GeometryError(ValueError):
    """Base for geometric domain errors."""


class DegenerateProjection(GeometryError):
    """Point projects to (or numerically at) the camera plane."""


class ZeroVector(GeometryError):
    """Operation needs a direction but the input has ~zero length."""


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n < 1e-9:
            raise ZeroVector(f"cannot normalize near-zero vector {self}")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


X_HAT = Vec3(1.0, 0.0, 0.0)
Y_HAT = Vec3(0.0, 1.0, 0.0)
Z_HAT = Vec3(0.0, 0.0, 1.0)


@dataclass(frozen=True, slots=True)
class Point2:
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class HomogeneousPoint:
    x: float
    y: float
    z: float
    w: float = 1.0

    @staticmethod
    def from_vec3(v: Vec3) -> "HomogeneousPoint":
        return HomogeneousPoint(v.x, v.y, v.z, 1.0)

    def to_vec3(self) -> Vec3:
        """Dehomogenize. Raises on w ~ 0."""
        if abs(self.w) < W_EPS:
            raise DegenerateProjection("homogeneous point at infinity")
        return Vec3(self.x / self.w, self.y / self.w, self.z / self.w)


@dataclass(frozen=True, slots=True)
class Mat3:
    """3x3 matrix, row-major 9-tuple."""

    m: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.m) != 9:
            raise GeometryError("Mat3 needs 9 entries")

    def __matmul__(self, other: "Mat3") -> "Mat3":
        a, b = self.m, other.m
        out = []
        for i in range(3):
            for j in range(3):
                out.append(
                    a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j]
                )
        return Mat3(tuple(out))

    def apply(self, v: Vec3) -> Vec3:
        m = self.m
        return Vec3(
            m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z,
        )

    def transposed(self) -> "Mat3":
        m = self.m
        return Mat3((m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]))


MAT3_IDENTITY = Mat3((1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0))


@dataclass(frozen=True, slots=True)
class Mat4:
    """4x4 homogeneous transform, row-major 16-tuple."""

    m: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.m) != 16:
            raise GeometryError("Mat4 needs 16 entries")

    def __matmul__(self, other: "Mat4") -> "Mat4":
        a, b = self.m, other.m
        out = []
        for i in range(4):
            for j in range(4):
                out.append(
                    a[4 * i] * b[j]
                    + a[4 * i + 1] * b[4 + j]
                    + a[4 * i + 2] * b[8 + j]
                    + a[4 * i + 3] * b[12 + j]
                )
        return Mat4(tuple(out))


MAT4_IDENTITY = Mat4(
    (1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
)


def make_scale(sx: float, sy: float, sz: float) -> Mat4:
    return Mat4((sx, 0.0, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 0.0, sz, 0.0, 0.0, 0.0, 0.0, 1.0))


def make_translation(tx: float, ty: float, tz: float) -> Mat4:
    return Mat4((1.0, 0.0, 0.0, tx, 0.0, 1.0, 0.0, ty, 0.0, 0.0, 1.0, tz, 0.0, 0.0, 0.0, 1.0))


def make_rotation_x(theta: float) -> Mat4:
    c, s = math.cos(theta), math.sin(theta)
    return Mat4((1.0, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0))


def make_rotation_y(theta: float) -> Mat4:
    c, s = math.cos(theta), math.sin(theta)
    return Mat4((c, 0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, 0.0, 0.0, 0.0, 0.0, 1.0))


def make_rotation_z(theta: float) -> Mat4:
    c, s = math.cos(theta), math.sin(theta)
    return Mat4((c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0))


def transform(m: Mat4, p: HomogeneousPoint) -> HomogeneousPoint:
    a = m.m
    return HomogeneousPoint(
        a[0] * p.x + a[1] * p.y + a[2] * p.z + a[3] * p.w,
        a[4] * p.x + a[5] * p.y + a[6] * p.z + a[7] * p.w,
        a[8] * p.x + a[9] * p.y + a[10] * p.z + a[11] * p.w,
        a[12] * p.x + a[13] * p.y + a[14] * p.z + a[15] * p.w,
    )


@dataclass(frozen=True, slots=True)
class EulerAngles:
    """Extrinsic x-y-z rotation: phi about x, then theta about y, then psi about z."""

    phi: float
    theta: float
    psi: float


@dataclass(frozen=True, slots=True)
class CameraPose:
    """Pinhole camera: world position, orientation, and projection surface
    offset e relative to the pinhole. e.z must be nonzero."""

    position: Vec3
    orientation: EulerAngles
    surface: Vec3

    def __post_init__(self) -> None:
        if abs(self.surface.z) < W_EPS:
            raise GeometryError("camera surface needs nonzero z offset")


def _camera_rotation(orientation: EulerAngles) -> Mat3:
    # World-to-camera change of basis: each factor is the transpose
    # (inverse) of the corresponding world rotation.
    cx, sx = math.cos(orientation.phi), math.sin(orientation.phi)
    cy, sy = math.cos(orientation.theta), math.sin(orientation.theta)
    cz, sz = math.cos(orientation.psi), math.sin(orientation.psi)
    rx = Mat3((1.0, 0.0, 0.0, 0.0, cx, sx, 0.0, -sx, cx))
    ry = Mat3((cy, 0.0, -sy, 0.0, 1.0, 0.0, sy, 0.0, cy))
    rz = Mat3((cz, sz, 0.0, -sz, cz, 0.0, 0.0, 0.0, 1.0))
    return rx @ ry @ rz


def camera_matrix(camera: CameraPose) -> Mat3:
    """Combined rotation and surface matrix; apply to (p - position),
    then divide by the third component to get surface coordinates."""
    e = camera.surface
    surface = Mat3((1.0, 0.0, e.x / e.z, 0.0, 1.0, e.y / e.z, 0.0, 0.0, 1.0 / e.z))
    return surface @ _camera_rotation(camera.orientation)


def project(camera: CameraPose, p: Vec3) -> Point2:
    """Project a world point onto the camera surface.

    The point is expressed relative to the pinhole, rotated into camera
    axes, skewed by the surface offset, and dehomogenized. Points whose
    transformed depth is within W_EPS of zero raise DegenerateProjection.
    """
    f = camera_matrix(camera).apply(p - camera.position)
    if abs(f.z) < W_EPS:
        raise DegenerateProjection(f"point {p} projects to the camera plane")
    return Point2(f.x / f.z, f.y / f.z)


@dataclass(frozen=True, slots=True)
class Quaternion:
    x: float
    y: float
    z: float
    w: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w)

    def is_unit(self, tol: float = _UNIT_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < 1e-9:
            raise ZeroVector("cannot normalize near-zero quaternion")
        return Quaternion(self.x / n, self.y / n, self.z / n, self.w / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(-self.x, -self.y, -self.z, self.w)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.w)


QUAT_IDENTITY = Quaternion(0.0, 0.0, 0.0, 1.0)


def quaternion_from_axis_angle(axis: Vec3, angle: float) -> Quaternion:
    u = axis.normalized()
    h = 0.5 * angle
    s = math.sin(h)
    return Quaternion(u.x * s, u.y * s, u.z * s, math.cos(h))


def quaternion_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a*b (applies b first), renormalized to keep long
    chains on the unit sphere."""
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    return Quaternion(x, y, z, w).normalized()


def rotate_vector(q: Quaternion, v: Vec3) -> Vec3:
    """Apply the rotation q to v via the sandwich q v q*."""
    # Expanded form of q * (v, 0) * conj(q); avoids the intermediate
    # renormalization that quaternion_multiply would impose.
    tx = 2.0 * (q.y * v.z - q.z * v.y)
    ty = 2.0 * (q.z * v.x - q.x * v.z)
    tz = 2.0 * (q.x * v.y - q.y * v.x)
    return Vec3(
        v.x + q.w * tx + (q.y * tz - q.z * ty),
        v.y + q.w * ty + (q.z * tx - q.x * tz),
        v.z + q.w * tz + (q.x * ty - q.y * tx),
    )


def quaternion_between(a: Vec3, b: Vec3) -> Quaternion:
    """Minimal-arc rotation taking direction a to direction b.

    For (near) antipodal inputs the arc is ambiguous; we pick a
    deterministic 180-degree turn about an axis perpendicular to a,
    built from y_hat when a is not too close to it, else from z_hat.
    """
    u = a.normalized()
    v = b.normalized()
    d = u.dot(v)
    if d < -1.0 + ANTIPODAL_EPS:
        ref = Y_HAT if abs(u.dot(Y_HAT)) < 0.9 else Z_HAT
        axis = u.cross(ref).normalized()
        return Quaternion(axis.x, axis.y, axis.z, 0.0)
    c = u.cross(v)
    return Quaternion(c.x, c.y, c.z, 1.0 + d).normalized()


def euler_to_matrix(angles: EulerAngles) -> Mat3:
    """Rotation matrix R_z(psi) R_y(theta) R_x(phi)."""
    cx, sx = math.cos(angles.phi), math.sin(angles.phi)
    cy, sy = math.cos(angles.theta), math.sin(angles.theta)
    cz, sz = math.cos(angles.psi), math.sin(angles.psi)
    rx = Mat3((1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx))
    ry = Mat3((cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy))
    rz = Mat3((cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0))
    return rz @ ry @ rx


def euler_to_quaternion(angles: EulerAngles) -> Quaternion:
    """Quaternion equivalent of euler_to_matrix: q_z * q_y * q_x."""
    hx, hy, hz = 0.5 * angles.phi, 0.5 * angles.theta, 0.5 * angles.psi
    cx, sx = math.cos(hx), math.sin(hx)
    cy, sy = math.cos(hy), math.sin(hy)
    cz, sz = math.cos(hz), math.sin(hz)
    return Quaternion(
        sx * cy * cz - cx * sy * sz,
        cx * sy * cz + sx * cy * sz,
        cx * cy * sz - sx * sy * cz,
        cx * cy * cz + sx * sy * sz,
    )


def quaternion_to_matrix(q: Quaternion) -> Mat3:
    """Rotation matrix with the same action as rotate_vector(q, .)."""
    x, y, z, w = q.x, q.y, q.z, q.w
    return Mat3(
        (
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    )
