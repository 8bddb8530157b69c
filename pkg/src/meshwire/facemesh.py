"""Landmark-frame model: 468-point frames, triangle tessellation into a
double-sided mesh, rigid calibration, and the text file formats shared
with other implementations (calibration profiles, landmark recordings,
tessellation tables).

Calibration aligns the tracked face to a canonical pose: the center-nose
landmark moves to the origin, the eyelash-to-nose up direction to +y,
the eyelash-to-eyelash right direction to +x, leaving the face normal
(right x up) on +z, pointing out of the screen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Quaternion,
    QUAT_IDENTITY,
    Vec3,
    X_HAT,
    Y_HAT,
    quaternion_multiply,
    quaternion_between,
    quaternion_to_matrix,
    rotate_vector,
)

LANDMARK_COUNT = 468

# Semantic landmark indices.
LOWER_NOSE = 1
CENTER_NOSE = 5
LEFT_EYELASH = 52
RIGHT_EYELASH = 282

PROFILE_VERSION = 1


class FacemeshError(ValueError):
    pass


class DegenerateFrame(FacemeshError):
    """Frame geometry too collapsed to calibrate against."""


class IndexOutOfRange(FacemeshError):
    pass


class AlreadyDoubleSided(FacemeshError):
    pass


class MalformedTable(FacemeshError):
    pass


class MalformedProfile(FacemeshError):
    pass


class NonUnitQuaternion(MalformedProfile):
    pass


class UnreadableRecording(FacemeshError):
    pass


class LandmarkFrame:
    """One tracked frame: 468 points and a millisecond timestamp.

    Points live in a read-only (468, 3) float64 array; the frame is an
    immutable value. Non-finite points are representable (trackers drop
    out) but rejected by the geometric operations that need real shape.
    """

    __slots__ = ("points", "timestamp_ms")

    def __init__(self, points, timestamp_ms: int = 0):
        arr = np.asarray(points, dtype=np.float64)
        if arr.shape != (LANDMARK_COUNT, 3):
            raise FacemeshError(
                f"frame needs shape ({LANDMARK_COUNT}, 3), got {arr.shape}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "timestamp_ms", int(timestamp_ms))

    def __setattr__(self, name, value):
        raise AttributeError("LandmarkFrame is immutable")

    def point(self, index: int) -> Vec3:
        x, y, z = self.points[index]
        return Vec3(float(x), float(y), float(z))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.points).all())

    def __eq__(self, other):
        if not isinstance(other, LandmarkFrame):
            return NotImplemented
        return self.timestamp_ms == other.timestamp_ms and np.array_equal(
            self.points, other.points
        )

    def __repr__(self):
        return f"LandmarkFrame(t={self.timestamp_ms}ms, {LANDMARK_COUNT} points)"


@dataclass(frozen=True)
class CalibrationState:
    """Rigid correction: translate, then rotate about the origin, then
    scale uniformly."""

    translation: Vec3 = Vec3(0.0, 0.0, 0.0)
    rotation: Quaternion = QUAT_IDENTITY
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise FacemeshError("scale must be positive")
        if not self.rotation.is_unit():
            raise NonUnitQuaternion(f"rotation norm {self.rotation.norm()!r}")


IDENTITY_CALIBRATION = CalibrationState()


@dataclass(frozen=True)
class TessellationTable:
    """Triangle index triples over the 468 landmark slots."""

    triangles: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    triangles: tuple[tuple[int, int, int], ...]
    double_sided: bool = False


def _require_finite(frame: LandmarkFrame, op: str) -> None:
    if not frame.is_finite():
        raise DegenerateFrame(f"{op} needs finite landmarks")


def compute_up(frame: LandmarkFrame) -> Vec3:
    """Up direction: eyelash midpoint relative to the lower nose."""
    mid = 0.5 * (frame.point(LEFT_EYELASH) + frame.point(RIGHT_EYELASH))
    return mid - frame.point(LOWER_NOSE)


def compute_right(frame: LandmarkFrame) -> Vec3:
    """Right direction: left eyelash toward right eyelash."""
    return frame.point(RIGHT_EYELASH) - frame.point(LEFT_EYELASH)


def face_normal(frame: LandmarkFrame) -> Vec3:
    """Outward unit normal of the eyelash-nose triangle (right x up);
    +z for a calibrated face, pointing out of the screen."""
    return compute_right(frame).cross(compute_up(frame)).normalized()


def calibrate(frame: LandmarkFrame) -> CalibrationState:
    """Measure the rigid correction for an initial frame.

    Translation recenters the center nose on the origin. Rotation is
    composed from two minimal arcs measured one after the other: first
    the arc taking the right direction to +x, then, with that arc
    already applied, the arc taking the rotated up direction to +y.
    When up is perpendicular to right the second arc spins about +x, so
    both alignments hold exactly; otherwise right stays exact and the
    up residual reflects the frame's own skew. Scale starts at 1; it is
    a user knob, never solved for.
    """
    _require_finite(frame, "calibrate")
    up = compute_up(frame)
    right = compute_right(frame)
    if up.norm() < 1e-9 or right.norm() < 1e-9:
        raise DegenerateFrame("up/right directions collapsed")
    q_right = quaternion_between(right, X_HAT)
    q_up = quaternion_between(rotate_vector(q_right, up.normalized()), Y_HAT)
    rotation = quaternion_multiply(q_up, q_right)
    return CalibrationState(
        translation=-frame.point(CENTER_NOSE),
        rotation=rotation,
        scale=1.0,
    )


def apply_calibration(state: CalibrationState, frame: LandmarkFrame) -> LandmarkFrame:
    """Apply a calibration to every point: scale * R(p + t)."""
    t = np.array(state.translation.as_tuple(), dtype=np.float64)
    rot = np.array(quaternion_to_matrix(state.rotation).m, dtype=np.float64).reshape(3, 3)
    moved = (frame.points + t) @ rot.T * state.scale
    return LandmarkFrame(moved, frame.timestamp_ms)


def double_side(mesh: TriangleMesh) -> TriangleMesh:
    """Append every triangle with reversed winding so the surface stays
    opaque from behind. Doubling twice would duplicate triangles, so it
    is rejected."""
    if mesh.double_sided:
        raise AlreadyDoubleSided("mesh is already double-sided")
    reversed_tris = tuple((c, b, a) for a, b, c in mesh.triangles)
    return TriangleMesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles + reversed_tris,
        double_sided=True,
    )


def build_mesh(frame: LandmarkFrame, table: TessellationTable) -> TriangleMesh:
    """Tessellate a frame into a double-sided triangle mesh."""
    for tri in table.triangles:
        for idx in tri:
            if not 0 <= idx < LANDMARK_COUNT:
                raise IndexOutOfRange(f"triangle index {idx} outside 0..{LANDMARK_COUNT - 1}")
    single = TriangleMesh(vertices=frame.points, triangles=tuple(table.triangles))
    return double_side(single)


# ---------------------------------------------------------------------------
# tessellation table files
#
# Plain text: one triangle per line, three decimal indices separated by
# spaces; '#' starts a comment.


def parse_tessellation(text: str) -> TessellationTable:
    triangles = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MalformedTable(f"line {lineno}: expected 3 indices, got {len(parts)}")
        try:
            tri = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise MalformedTable(f"line {lineno}: {exc}") from exc
        if len(set(tri)) != 3:
            raise MalformedTable(f"line {lineno}: degenerate triangle {tri}")
        for idx in tri:
            if not 0 <= idx < LANDMARK_COUNT:
                raise MalformedTable(f"line {lineno}: index {idx} out of range")
        triangles.append(tri)
    return TessellationTable(triangles=tuple(triangles))


def load_tessellation(path) -> TessellationTable:
    with open(path, "r", encoding="ascii") as fh:
        return parse_tessellation(fh.read())


def format_tessellation(table: TessellationTable) -> str:
    lines = ["# face tessellation: one triangle per line, landmark indices"]
    lines += [f"{a} {b} {c}" for a, b, c in table.triangles]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# calibration profile documents
#
# Key=value text, one field per line. The version field is mandatory.


def save_calibration(state: CalibrationState) -> str:
    t = state.translation
    r = state.rotation
    return (
        f"version={PROFILE_VERSION}\n"
        f"translation={t.x!r} {t.y!r} {t.z!r}\n"
        f"rotation={r.x!r} {r.y!r} {r.z!r} {r.w!r}\n"
        f"scale={state.scale!r}\n"
    )


def load_calibration(doc: str) -> CalibrationState:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(doc.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedProfile(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()

    if fields.get("version") != str(PROFILE_VERSION):
        raise MalformedProfile(f"unsupported profile version {fields.get('version')!r}")

    def floats(key: str, count: int) -> list[float]:
        if key not in fields:
            raise MalformedProfile(f"missing field {key}")
        parts = fields[key].split()
        if len(parts) != count:
            raise MalformedProfile(f"field {key} needs {count} numbers")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise MalformedProfile(f"field {key}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise MalformedProfile(f"field {key}: non-finite value")
        return values

    tx, ty, tz = floats("translation", 3)
    qx, qy, qz, qw = floats("rotation", 4)
    (scale,) = floats("scale", 1)
    rotation = Quaternion(qx, qy, qz, qw)
    if not rotation.is_unit():
        raise NonUnitQuaternion(f"rotation norm {rotation.norm()!r}")
    if scale <= 0:
        raise MalformedProfile(f"scale must be positive, got {scale!r}")
    return CalibrationState(Vec3(tx, ty, tz), rotation, scale)


def write_calibration_file(path, state: CalibrationState) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(save_calibration(state))


def read_calibration_file(path) -> CalibrationState:
    with open(path, "r", encoding="ascii") as fh:
        return load_calibration(fh.read())


# ---------------------------------------------------------------------------
# landmark recordings
#
# Line format: header "landmark_count=468", then one line per frame:
# "<timestamp_ms> <1404 reals>" with coordinates interleaved x y z per
# landmark. repr() precision so recordings round-trip bit-exactly.


def write_recording(path, frames) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"landmark_count={LANDMARK_COUNT}\n")
        for frame in frames:
            flat = " ".join(repr(float(v)) for v in frame.points.reshape(-1))
            fh.write(f"{frame.timestamp_ms} {flat}\n")


def iter_recording(path):
    """Stream frames from a recording file without loading it whole."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != f"landmark_count={LANDMARK_COUNT}":
            raise UnreadableRecording(f"bad recording header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 1 + LANDMARK_COUNT * 3:
                raise UnreadableRecording(
                    f"line {lineno}: expected {1 + LANDMARK_COUNT * 3} fields, got {len(parts)}"
                )
            try:
                ts = int(parts[0])
                coords = np.array(parts[1:], dtype=np.float64).reshape(LANDMARK_COUNT, 3)
            except ValueError as exc:
                raise UnreadableRecording(f"line {lineno}: {exc}") from exc
            yield LandmarkFrame(coords, ts)


def read_recording(path) -> list[LandmarkFrame]:
    try:
        return list(iter_recording(path))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise UnreadableRecording(str(exc)) from exc
