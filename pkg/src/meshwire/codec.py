"""Half-precision wire codec.

Converts landmark coordinates to IEEE 754 half precision by mantissa
truncation (never rounding, so decoded magnitudes never exceed the
source), packs them into the fixed 2838-byte mesh frame packet, and
provides the send pacing and rate budget arithmetic.

Wire layout, all multi-byte fields little-endian:

    offset  size  field
    0       2     magic "MW"
    2       1     version (1)
    3       1     flags
    4       4     sequence
    8       8     timestamp_ms
    16      2808  coords: 468 landmarks x 3 halfs
    2824    6     translation: 3 halfs
    2830    8     rotation: x, y, z, w halfs
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"MW"
VERSION = 1
LANDMARK_COUNT = 468
FRAME_SIZE = 2838
HEADER_SIZE = 16

# flags byte
FLAG_NONFINITE = 0x01  # some coordinate was NaN or infinite
FLAG_END_OF_STREAM = 0x02  # sender's final packet

_HEADER = struct.Struct("<2sBBIQ")
_COORD_BYTES = LANDMARK_COUNT * 3 * 2

# Half layout: 1 sign, 5 exponent (bias 15), 10 mantissa bits.
_H_QNAN = 0x7E00
_H_INF = 0x7C00


class CodecError(ValueError):
    """Base for packet coding errors."""


class WrongLandmarkCount(CodecError):
    pass


class BadMagic(CodecError):
    pass


class BadVersion(CodecError):
    pass


class BadLength(CodecError):
    pass


# ---------------------------------------------------------------------------
# scalar conversions


def f32_to_f16(x: float) -> int:
    """Convert a single-precision value to a half bit pattern.

    Sign is copied, the exponent is rebiased by -127+15, and the mantissa
    keeps its top 10 bits with the rest cut off. Values at or above 2^16
    overflow to signed infinity; values below the smallest half normal
    fall into subnormals (still truncating) and then to signed zero.
    NaN becomes the quiet pattern 0x7E00 with sign preserved.
    """
    bits = struct.unpack("<I", struct.pack("<f", x))[0]
    sign = (bits >> 16) & 0x8000
    exp = (bits >> 23) & 0xFF
    mant = bits & 0x7FFFFF
    if exp == 0xFF:
        return sign | (_H_INF if mant == 0 else _H_QNAN)
    e16 = exp - 127 + 15
    if e16 >= 31:
        return sign | _H_INF
    if e16 >= 1:
        return sign | (e16 << 10) | (mant >> 13)
    if e16 >= -9 and exp != 0:
        # gradual underflow: implicit bit restored, shifted into the
        # 2^-24-quantum subnormal grid, low bits truncated
        return sign | ((mant | 0x800000) >> (14 - e16))
    return sign


def f64_to_f16(x: float) -> int:
    """Truncate a double directly to a half bit pattern.

    Same rules as f32_to_f16 but without an intermediate single-precision
    rounding step, so the decoded magnitude never exceeds |x| even when x
    sits just under a half-representable value.
    """
    bits = struct.unpack("<Q", struct.pack("<d", x))[0]
    sign = (bits >> 48) & 0x8000
    exp = (bits >> 52) & 0x7FF
    mant = bits & 0xFFFFFFFFFFFFF
    if exp == 0x7FF:
        return sign | (_H_INF if mant == 0 else _H_QNAN)
    e16 = exp - 1023 + 15
    if e16 >= 31:
        return sign | _H_INF
    if e16 >= 1:
        return sign | (e16 << 10) | (mant >> 42)
    if e16 >= -9 and exp != 0:
        return sign | ((mant | (1 << 52)) >> (43 - e16))
    return sign


def f16_to_f32(h: int) -> float:
    """Exact widening of a half bit pattern (every half fits a float)."""
    sign = -1.0 if h & 0x8000 else 1.0
    exp = (h >> 10) & 0x1F
    mant = h & 0x3FF
    if exp == 0x1F:
        if mant:
            return float("nan")
        return sign * float("inf")
    if exp == 0:
        return sign * mant * 2.0**-24
    return sign * (1024 + mant) * 2.0 ** (exp - 25)


# ---------------------------------------------------------------------------
# vectorized conversions (same algorithms on whole arrays)


def f32_to_f16_array(values: np.ndarray) -> np.ndarray:
    """Vectorized f32_to_f16 over a float32 array; returns uint16.

    Same mapping as the scalar converter, restated without per-lane
    branching: normals are a shift plus exponent rebias, subnormal halfs
    are floor(|x| * 2^24) since their lattice unit is 2^-24, and floor
    of a positive value is truncation toward zero.
    """
    f = np.ascontiguousarray(values, dtype=np.float32)
    bits = f.view(np.uint32)
    sign = (bits >> np.uint32(16)) & np.uint32(0x8000)
    a = np.abs(f)

    # exp+mant shifted into half position; wraps on lanes it doesn't win
    normal = ((bits & np.uint32(0x7FFFFFFF)) >> np.uint32(13)) - np.uint32(112 << 10)
    small = np.where(a < 2.0**-14, a, np.float32(0.0))  # nan compares false
    sub = (small * np.float32(2.0**24)).astype(np.uint32)

    out = np.where(a >= 65536.0, np.uint32(_H_INF), np.where(a >= 2.0**-14, normal, sub))
    out = np.where(np.isnan(f), np.uint32(_H_QNAN), out)
    return (sign | out).astype(np.uint16)


def f64_to_f16_array(values: np.ndarray) -> np.ndarray:
    """Vectorized f64_to_f16 over a float64 array; returns uint16.

    Mirrors f32_to_f16_array with the double layout (42 dropped mantissa
    bits, rebias 1023-15). Scaling by 2^24 is exact in double, so the
    subnormal floor is still pure truncation.
    """
    f = np.ascontiguousarray(values, dtype=np.float64)
    bits = f.view(np.uint64)
    sign = ((bits >> np.uint64(48)) & np.uint64(0x8000)).astype(np.uint64)
    a = np.abs(f)

    normal = ((bits & np.uint64(0x7FFFFFFFFFFFFFFF)) >> np.uint64(42)) - np.uint64(1008 << 10)
    small = np.where(a < 2.0**-14, a, 0.0)
    sub = (small * 2.0**24).astype(np.uint64)

    out = np.where(a >= 65536.0, np.uint64(_H_INF), np.where(a >= 2.0**-14, normal, sub))
    out = np.where(np.isnan(f), np.uint64(_H_QNAN), out)
    return (sign | out).astype(np.uint16)


def f16_to_f32_array(halfs: np.ndarray) -> np.ndarray:
    """Vectorized exact widening; uint16 patterns in, float32 out."""
    h = np.ascontiguousarray(halfs, dtype=np.uint16)
    return h.view(np.float16).astype(np.float32)


def truncation_ulp(x: float) -> float:
    """Worst-case round-trip error at |x|: the half quantization step."""
    a = abs(x)
    if a < 2.0**-14:
        return 2.0**-24
    e = math.frexp(a)[1] - 1  # floor(log2 a)
    return 2.0 ** (e - 10)


# ---------------------------------------------------------------------------
# packet coding


@dataclass(frozen=True)
class MeshPose:
    """Rigid pose carried alongside the coordinates: translation then
    rotation quaternion (x, y, z, w)."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)


IDENTITY_POSE = MeshPose()


@dataclass(frozen=True)
class DecodedFrame:
    coords: np.ndarray  # (468, 3) float64
    pose: MeshPose
    sequence: int
    timestamp_ms: int
    flags: int

    @property
    def end_of_stream(self) -> bool:
        return bool(self.flags & FLAG_END_OF_STREAM)


def encode_frame(
    coords: np.ndarray,
    pose: MeshPose = IDENTITY_POSE,
    sequence: int = 0,
    timestamp_ms: int = 0,
    flags: int = 0,
) -> bytes:
    """Encode one 468-landmark frame into the 2838-byte wire packet.

    coords may be any array-like of shape (468, 3); values are truncated
    to half precision. Non-finite coordinates are encoded as-is and the
    nonfinite flag bit is set so receivers can discount the frame.
    """
    arr = np.asarray(coords, dtype=np.float64)
    if arr.shape != (LANDMARK_COUNT, 3):
        raise WrongLandmarkCount(f"expected ({LANDMARK_COUNT}, 3) coords, got {arr.shape}")
    if not np.isfinite(arr).all():
        flags |= FLAG_NONFINITE
    header = _HEADER.pack(MAGIC, VERSION, flags & 0xFF, sequence & 0xFFFFFFFF, timestamp_ms)
    payload = np.empty(LANDMARK_COUNT * 3 + 7, dtype=np.float64)
    payload[: LANDMARK_COUNT * 3] = arr.reshape(-1)
    payload[LANDMARK_COUNT * 3 :] = pose.translation + pose.rotation
    packet = header + f64_to_f16_array(payload).tobytes()
    assert len(packet) == FRAME_SIZE
    return packet


def decode_frame(data: bytes) -> DecodedFrame:
    """Decode a wire packet; inverse of encode_frame up to quantization."""
    if len(data) != FRAME_SIZE:
        raise BadLength(f"packet is {len(data)} bytes, expected {FRAME_SIZE}")
    magic, version, flags, sequence, timestamp_ms = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    halfs = np.frombuffer(data, dtype="<u2", offset=HEADER_SIZE)
    values = f16_to_f32_array(halfs).astype(np.float64)
    coords = values[: LANDMARK_COUNT * 3].reshape(LANDMARK_COUNT, 3)
    tail = [float(v) for v in values[LANDMARK_COUNT * 3 :]]
    pose = MeshPose(
        translation=(tail[0], tail[1], tail[2]),
        rotation=(tail[3], tail[4], tail[5], tail[6]),
    )
    return DecodedFrame(
        coords=coords,
        pose=pose,
        sequence=sequence,
        timestamp_ms=timestamp_ms,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# pacing and budgets


def pace(now: float, last_sent: float, fps_cap: float) -> bool:
    """True when a send is permitted: now - last_sent covers the frame
    interval (with 1 ms of scheduler slack). Callers coalesce otherwise,
    keeping only the newest pending frame."""
    if fps_cap <= 0:
        return False
    return (now - last_sent) >= (1.0 / fps_cap) - 0.001


class FramePacer:
    """Latest-wins send gate for one sender.

    offer() replaces any pending frame; poll() hands the pending frame
    out when the pace allows, recording the send time. Confine each
    instance to a single sender.
    """

    def __init__(self, fps_cap: float):
        self.fps_cap = fps_cap
        self._pending = None
        self._last_sent = float("-inf")
        self.offered = 0
        self.sent = 0

    def offer(self, frame, now: float) -> None:
        self._pending = frame
        self.offered += 1

    def poll(self, now: float):
        if self._pending is None:
            return None
        if not pace(now, self._last_sent, self.fps_cap):
            return None
        frame = self._pending
        self._pending = None
        self._last_sent = now
        self.sent += 1
        return frame


@dataclass(frozen=True)
class RateBudget:
    fps_cap: float
    bytes_per_frame: int
    bytes_per_second: float


def budget(fps_cap: float, bytes_per_frame: int = FRAME_SIZE) -> RateBudget:
    """Wire budget for paced streaming: fps cap times frame size."""
    if fps_cap < 0 or bytes_per_frame < 0:
        raise CodecError("budget inputs must be non-negative")
    return RateBudget(fps_cap, bytes_per_frame, fps_cap * bytes_per_frame)


def h264_reference_rate(
    width: int, height: int, bytes_per_pixel: int, fps: float, ratio: float
) -> float:
    """Reference video bitrate: raw pixel rate divided by the codec's
    compression ratio. Used as the comparison point for the mesh budget."""
    if ratio <= 0:
        raise CodecError("compression ratio must be positive")
    return width * height * bytes_per_pixel * fps / ratio
