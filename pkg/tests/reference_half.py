"""Independent half-precision truncation reference.

Deliberately built on frexp arithmetic rather than bit manipulation so
it shares no code or technique with the production converter. Semantics:
sign copied, exponent rebias to excess-15, mantissa truncated (round
toward zero), overflow at |x| >= 2^16 to signed infinity, values below
the smallest subnormal to signed zero, NaN to the canonical quiet NaN
with sign preserved.
"""

import math
import struct

import numpy as np

TWO_POW_24 = 2.0**24
MIN_NORMAL = 2.0**-14
OVERFLOW = 65536.0  # 2^16: smallest magnitude whose rebiased exponent leaves the field


def ref_half_bits(value: float) -> int:
    """Half bits for one Python float (exact for any f32 input since
    f32 -> f64 is lossless)."""
    sign = 0x8000 if math.copysign(1.0, value) < 0 else 0
    if math.isnan(value):
        return sign | 0x7E00
    a = abs(value)
    if a >= OVERFLOW:
        return sign | 0x7C00
    if a == 0.0:
        return sign
    if a >= MIN_NORMAL:
        m, e = math.frexp(a)  # a = m * 2^e with m in [0.5, 1)
        exponent = e + 14  # e-1 is the power of the leading bit; +15 bias
        fraction = int(m * 2048.0) - 1024  # truncate toward zero
        return sign | (exponent << 10) | fraction
    return sign | int(a * TWO_POW_24)


def ref_f32_bits_to_f16(bits32: int) -> int:
    value = struct.unpack("<f", struct.pack("<I", bits32))[0]
    result = ref_half_bits(value)
    if math.isnan(value):
        # sign lives in the source bits; copysign on a NaN is
        # platform-honest but take it straight from the pattern
        result = (0x8000 if bits32 >> 31 else 0) | 0x7E00
    return result


def ref_f32_bits_to_f16_array(bits32: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        values = bits32.astype(np.uint32).view(np.float32).astype(np.float64)
        sign = ((bits32 >> 31) & 1).astype(np.uint16) << 15
        a = np.abs(values)
        nan = np.isnan(values)
        overflow = ~nan & (a >= OVERFLOW)
        normal = ~nan & (a >= MIN_NORMAL) & (a < OVERFLOW)
        subnormal = ~nan & (a > 0.0) & (a < MIN_NORMAL)

        out = np.zeros(bits32.shape, dtype=np.uint16)
        m, e = np.frexp(a)
        exponent = e.astype(np.int64) + 14
        fraction = np.nan_to_num(m * 2048.0).astype(np.int64) - 1024
        out[normal] = ((exponent[normal] << 10) | fraction[normal]).astype(np.uint16)
        out[subnormal] = (a[subnormal] * TWO_POW_24).astype(np.int64).astype(np.uint16)
        out[overflow] = 0x7C00
        out[nan] = 0x7E00
    return out | sign


def ref_f64_to_f16_array(values: np.ndarray) -> np.ndarray:
    """Same semantics applied directly to doubles (the encoder path)."""
    with np.errstate(invalid="ignore"):
        values = np.asarray(values, dtype=np.float64)
        sign_bit = (np.signbit(values)).astype(np.uint16) << 15
        a = np.abs(values)
        nan = np.isnan(values)
        overflow = ~nan & (a >= OVERFLOW)
        normal = ~nan & (a >= MIN_NORMAL) & (a < OVERFLOW)
        subnormal = ~nan & (a > 0.0) & (a < MIN_NORMAL)

        out = np.zeros(values.shape, dtype=np.uint16)
        m, e = np.frexp(a)
        exponent = e.astype(np.int64) + 14
        fraction = np.nan_to_num(m * 2048.0).astype(np.int64) - 1024
        out[normal] = ((exponent[normal] << 10) | fraction[normal]).astype(np.uint16)
        out[subnormal] = (a[subnormal] * TWO_POW_24).astype(np.int64).astype(np.uint16)
        out[overflow] = 0x7C00
        out[nan] = 0x7E00
    return out | sign_bit


def ref_half_to_double(bits16: int) -> float:
    """Exact value of one half bit pattern."""
    sign = -1.0 if bits16 & 0x8000 else 1.0
    exponent = (bits16 >> 10) & 0x1F
    fraction = bits16 & 0x3FF
    if exponent == 0x1F:
        return sign * (math.nan if fraction else math.inf)
    if exponent == 0:
        return sign * fraction * 2.0**-24
    return sign * (1024 + fraction) * 2.0 ** (exponent - 25)


def ref_truncation_ulp(value: float) -> float:
    """Quantization step of truncation at this magnitude."""
    a = abs(value)
    if a < MIN_NORMAL:
        return 2.0**-24
    _, e = math.frexp(a)
    return 2.0 ** (e - 11)  # leading bit at 2^(e-1); 10 mantissa bits below


def ref_truncation_ulp_array(values: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(values, dtype=np.float64))
    _, e = np.frexp(a)
    return np.where(a < MIN_NORMAL, 2.0**-24, np.exp2(e - 11))


BOUNDARY_F32_PATTERNS = [
    0x00000000,  # +0
    0x80000000,  # -0
    0x7F7FFFFF,  # +max normal
    0xFF7FFFFF,  # -max normal
    0x00800000,  # +min normal
    0x80800000,  # -min normal
    0x00000001,  # +min subnormal
    0x80000001,  # -min subnormal
    0x7F800000,  # +inf
    0xFF800000,  # -inf
    0x7FC00000,  # quiet NaN
    0xFFC00000,  # -quiet NaN
    0x7F800001,  # signaling NaN
    0xFF800001,  # -signaling NaN
    0x7FFFFFFF,  # NaN, all payload bits
    # half-precision edges expressed as f32
    0x477FE000,  # 65504, largest finite half
    0x477FEFFF,  # just under 65520: still truncates to 65504
    0x477FF000,  # 65520: truncation keeps it finite at 65504
    0x477FFFFF,  # just under 65536: truncates to 65504
    0x47800000,  # 65536: overflows to inf
    0x38800000,  # 2^-14, smallest normal half
    0x387FC000,  # largest subnormal half
    0x33800000,  # 2^-24, smallest subnormal half
    0x33000000,  # 2^-25: truncates to zero
    0x337FFFFF,  # just under 2^-24: truncates to zero
]
