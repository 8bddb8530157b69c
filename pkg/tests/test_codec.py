import json
import math
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshwire.codec import (
    FLAG_END_OF_STREAM,
    FLAG_NONFINITE,
    FRAME_SIZE,
    HEADER_SIZE,
    IDENTITY_POSE,
    LANDMARK_COUNT,
    MAGIC,
    VERSION,
    BadLength,
    BadMagic,
    BadVersion,
    CodecError,
    FramePacer,
    MeshPose,
    WrongLandmarkCount,
    budget,
    decode_frame,
    encode_frame,
    f16_to_f32,
    f16_to_f32_array,
    f32_to_f16,
    f32_to_f16_array,
    f64_to_f16,
    f64_to_f16_array,
    h264_reference_rate,
    pace,
    truncation_ulp,
)
from reference_half import (
    BOUNDARY_F32_PATTERNS,
    ref_f32_bits_to_f16,
    ref_f64_to_f16_array,
    ref_half_to_double,
    ref_truncation_ulp,
)

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def load_golden():
    with open(os.path.join(GOLDEN_DIR, "mesh_frame.json")) as fh:
        doc = json.load(fh)
    with open(os.path.join(GOLDEN_DIR, "mesh_frame.bin"), "rb") as fh:
        packet = fh.read()
    return doc, packet


# -- golden wire format --------------------------------------------------------


def test_golden_packet_byte_identical():
    doc, golden = load_golden()
    pose = MeshPose(tuple(doc["translation"]), tuple(doc["rotation"]))
    packet = encode_frame(
        np.array(doc["coords"]),
        pose,
        sequence=doc["sequence"],
        timestamp_ms=doc["timestamp_ms"],
        flags=doc["flags"],
    )
    assert packet == golden


def test_golden_decode_fields():
    doc, golden = load_golden()
    frame = decode_frame(golden)
    assert frame.sequence == doc["sequence"]
    assert frame.timestamp_ms == doc["timestamp_ms"]
    assert frame.flags == doc["flags"]
    # decoded values are the truncated halves, exact per the reference
    coords = np.array(doc["coords"]).reshape(-1)
    expected = np.array([ref_half_to_double(int(h)) for h in ref_f64_to_f16_array(coords)])
    assert np.array_equal(frame.coords.reshape(-1), expected)


def test_golden_header_layout():
    _, golden = load_golden()
    assert golden[:2] == MAGIC == b"MW"
    assert golden[2] == VERSION == 1
    magic, version, flags, sequence, ts = struct.unpack_from("<2sBBIQ", golden)
    assert (magic, version) == (b"MW", 1)
    assert len(golden) == FRAME_SIZE == 2838
    assert HEADER_SIZE == 16
    # 468 landmarks * 3 coords * 2 bytes + 7 pose halves
    assert FRAME_SIZE == HEADER_SIZE + LANDMARK_COUNT * 6 + 14


# -- scalar conversion ----------------------------------------------------------


def bits_to_f32(b: int) -> float:
    return struct.unpack("<f", struct.pack("<I", b))[0]


def test_boundary_patterns_match_reference():
    for b in BOUNDARY_F32_PATTERNS:
        got = f32_to_f16(bits_to_f32(b))
        assert got == ref_f32_bits_to_f16(b), hex(b)


def test_truncation_magnitude_examples():
    # one ulp below 1.0 truncates to the previous half step
    assert f32_to_f16(1.0) == 0x3C00
    assert f32_to_f16(1.0009765) == 0x3C00  # just under 1 + 2^-10
    assert f32_to_f16(1.0009766) == 0x3C01
    assert f32_to_f16(-2.5) == 0xC100
    assert f32_to_f16(65504.0) == 0x7BFF
    assert f32_to_f16(65520.0) == 0x7BFF  # truncation keeps it finite
    assert f32_to_f16(65536.0) == 0x7C00
    assert f32_to_f16(float("inf")) == 0x7C00
    assert f32_to_f16(float("-inf")) == 0xFC00
    assert f32_to_f16(float("nan")) == 0x7E00


def test_exhaustive_half_width_round_trip():
    """Every half value widens exactly, and widening then narrowing is
    the identity on non-NaN patterns (NaN collapses to the canonical
    quiet pattern with the sign preserved)."""
    all16 = np.arange(65536, dtype=np.uint16)
    widened = f16_to_f32_array(all16)
    # exact widening, checked against the reference on every pattern
    with np.errstate(invalid="ignore"):
        vals = widened.astype(np.float64)
    for h in range(0, 65536, 257):  # stride covers all exponent rows
        want = ref_half_to_double(h)
        got = float(vals[h])
        if math.isnan(want):
            assert math.isnan(got)
        else:
            assert got == want, hex(h)
    back = f32_to_f16_array(widened)
    exp = (all16 >> 10) & 0x1F
    mant = all16 & 0x3FF
    is_nan = (exp == 0x1F) & (mant != 0)
    assert np.array_equal(back[~is_nan], all16[~is_nan])
    assert np.array_equal(back[is_nan], (all16[is_nan] & 0x8000) | 0x7E00)


def test_scalar_and_vector_paths_agree():
    rng = np.random.RandomState(11)
    vals32 = rng.uniform(-1e5, 1e5, 2000).astype(np.float32)
    vec = f32_to_f16_array(vals32)
    for i in range(0, 2000, 97):
        assert f32_to_f16(float(vals32[i])) == int(vec[i])
    vals64 = rng.uniform(-70000, 70000, 2000)
    vec64 = f64_to_f16_array(vals64)
    for i in range(0, 2000, 97):
        assert f64_to_f16(float(vals64[i])) == int(vec64[i])


def test_f64_direct_path_differs_from_f32_detour():
    # a double just above a half-representable value but below the next
    # f32 step up: rounding through f32 first would overshoot
    x = 1.00048828125 + 1e-12  # 1 + 2^-11 + epsilon, midpoint over half step 1.0
    direct = f64_to_f16(x)
    assert direct == 0x3C00  # truncation stays below
    assert f16_to_f32(direct) <= x


@settings(max_examples=200, deadline=None)
@given(st.floats(-8.0, 8.0, allow_nan=False))
def test_truncation_biased_toward_zero(x):
    h = f64_to_f16(x)
    back = f16_to_f32(h)
    assert abs(back) <= abs(x)
    assert abs(x - back) < truncation_ulp(x) or x == back


def test_truncation_ulp_values():
    assert truncation_ulp(1.0) == 2.0**-10
    assert truncation_ulp(-1.5) == 2.0**-10
    assert truncation_ulp(2.0) == 2.0**-9
    assert truncation_ulp(7.9) == 2.0**-8
    assert truncation_ulp(1e-6) == 2.0**-24
    assert truncation_ulp(0.0) == 2.0**-24
    for x in (0.001, 0.3, 1.7, 42.0, 6e-5):
        assert truncation_ulp(x) == ref_truncation_ulp(x)


# -- frame packets ---------------------------------------------------------------


def random_coords(seed=0):
    return np.random.RandomState(seed).uniform(-2, 2, (LANDMARK_COUNT, 3))


def test_encode_size_is_constant():
    for seed in range(5):
        assert len(encode_frame(random_coords(seed))) == FRAME_SIZE


def test_encode_rejects_wrong_shape():
    with pytest.raises(WrongLandmarkCount):
        encode_frame(np.zeros((10, 3)))
    with pytest.raises(WrongLandmarkCount):
        encode_frame(np.zeros((LANDMARK_COUNT, 2)))


def test_nonfinite_coordinates_flagged():
    coords = random_coords()
    coords[3, 1] = np.nan
    packet = encode_frame(coords)
    frame = decode_frame(packet)
    assert frame.flags & FLAG_NONFINITE
    assert math.isnan(frame.coords[3, 1])
    assert np.isfinite(np.delete(frame.coords.reshape(-1), 3 * 3 + 1)).all()


def test_end_of_stream_flag_round_trips():
    packet = encode_frame(random_coords(), flags=FLAG_END_OF_STREAM)
    assert decode_frame(packet).end_of_stream
    assert not decode_frame(encode_frame(random_coords())).end_of_stream


def test_sequence_and_timestamp_round_trip():
    packet = encode_frame(random_coords(), sequence=0xFFFFFFFF, timestamp_ms=2**40)
    frame = decode_frame(packet)
    assert frame.sequence == 0xFFFFFFFF
    assert frame.timestamp_ms == 2**40


def test_pose_round_trip():
    # 1448/2048 and friends: exactly representable in half precision
    pose = MeshPose((0.5, -0.25, 1.0), (0.0, 0.70703125, 0.0, 0.70703125))
    frame = decode_frame(encode_frame(random_coords(), pose))
    # pose components chosen half-representable: exact round trip
    assert frame.pose.translation == pose.translation
    assert frame.pose.rotation == pose.rotation


def test_decode_rejects_bad_input():
    packet = encode_frame(random_coords())
    with pytest.raises(BadLength):
        decode_frame(packet[:-1])
    with pytest.raises(BadMagic):
        decode_frame(b"XX" + packet[2:])
    with pytest.raises(BadVersion):
        decode_frame(packet[:2] + b"\x09" + packet[3:])


def test_identity_pose_default():
    frame = decode_frame(encode_frame(random_coords()))
    assert frame.pose.translation == (0.0, 0.0, 0.0)
    assert frame.pose.rotation == (0.0, 0.0, 0.0, 1.0)
    assert IDENTITY_POSE.rotation == (0.0, 0.0, 0.0, 1.0)


# -- pacing and budgets -----------------------------------------------------------


def test_pace_interval_gate():
    assert pace(1.0, 0.0, 30.0)
    assert pace(1.0 / 30.0, 0.0, 30.0)
    assert pace(1.0 / 30.0 - 0.0005, 0.0, 30.0)  # inside the 1 ms slack
    assert not pace(1.0 / 30.0 - 0.002, 0.0, 30.0)
    assert not pace(1.0, 0.0, 0.0)


def test_pacer_latest_wins():
    pacer = FramePacer(30.0)
    pacer.offer("a", 0.0)
    assert pacer.poll(0.0) == "a"
    pacer.offer("b", 0.01)
    pacer.offer("c", 0.02)
    assert pacer.poll(0.02) is None  # too soon after "a"
    assert pacer.poll(0.04) == "c"  # "b" was coalesced away
    assert pacer.offered == 3
    assert pacer.sent == 2
    assert pacer.poll(1.0) is None  # nothing pending


def test_budget_values():
    assert budget(30.0).bytes_per_second == 85140.0
    assert budget(30.0, 2838).bytes_per_second == 85140.0
    assert budget(0.0).bytes_per_second == 0.0
    with pytest.raises(CodecError):
        budget(-1.0)


def test_h264_reference_rate():
    assert h264_reference_rate(1080, 1920, 3, 30.0, 2000.0) == 93312.0
    with pytest.raises(CodecError):
        h264_reference_rate(1080, 1920, 3, 30.0, 0.0)
