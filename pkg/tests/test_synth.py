import itertools

import numpy as np
import pytest

from meshwire.facemesh import (
    CENTER_NOSE,
    LANDMARK_COUNT,
    LEFT_EYELASH,
    LOWER_NOSE,
    RIGHT_EYELASH,
)
from meshwire.synth import (
    GRID_COLS,
    GRID_ROWS,
    MOTIONS,
    canonical_face,
    endless_frames,
    generate_frames,
    grid_tessellation,
)


def test_canonical_shape_and_pins():
    pts = canonical_face()
    assert pts.shape == (LANDMARK_COUNT, 3)
    assert pts.dtype == np.float64
    assert tuple(pts[CENTER_NOSE]) == (0.0, 0.0, 0.0)
    assert tuple(pts[LOWER_NOSE]) == (0.0, -0.5, 0.0)
    assert tuple(pts[LEFT_EYELASH]) == (-0.5, 0.5, 0.0)
    assert tuple(pts[RIGHT_EYELASH]) == (0.5, 0.5, 0.0)


def test_canonical_face_is_fresh_copy():
    a = canonical_face()
    a[0, 0] = 42.0
    assert canonical_face()[0, 0] != 42.0


def test_frame_zero_is_canonical():
    for kind in MOTIONS:
        frames = generate_frames(kind, 1)
        assert np.array_equal(frames[0].points, canonical_face()), kind


def test_timestamps_follow_fps():
    frames = generate_frames("nod", 5, fps=25.0)
    assert [f.timestamp_ms for f in frames] == [0, 40, 80, 120, 160]


def test_rigid_motions_preserve_distances():
    base = canonical_face()
    idx = [(0, 100), (50, 300), (CENTER_NOSE, RIGHT_EYELASH)]
    for kind in ("nod", "shake", "orbit"):
        for frame in generate_frames(kind, 9, fps=12.0):
            for i, j in idx:
                d0 = np.linalg.norm(base[i] - base[j])
                d1 = np.linalg.norm(frame.points[i] - frame.points[j])
                assert abs(d0 - d1) < 1e-12, kind


def test_still_stays_put():
    for frame in generate_frames("still", 4):
        assert np.array_equal(frame.points, canonical_face())


def test_nod_actually_moves():
    frames = generate_frames("nod", 10, fps=30.0)
    assert not np.array_equal(frames[3].points, frames[0].points)


def test_noise_is_seeded():
    a = generate_frames("still", 3, noise=0.05, seed=11)
    b = generate_frames("still", 3, noise=0.05, seed=11)
    c = generate_frames("still", 3, noise=0.05, seed=12)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.points, fb.points)
    assert not np.array_equal(a[0].points, c[0].points)


def test_unknown_motion_rejected():
    with pytest.raises(ValueError):
        generate_frames("cartwheel", 3)
    with pytest.raises(ValueError):
        generate_frames("nod", 0)


def test_endless_frames_monotone_timestamps():
    gen = endless_frames("orbit", fps=60.0)
    stamps = [f.timestamp_ms for f in itertools.islice(gen, 600)]
    assert all(b > a for a, b in zip(stamps, stamps[1:]))
    assert len(stamps) == 600


def test_grid_tessellation_shape():
    table = grid_tessellation()
    assert len(table.triangles) == 2 * (GRID_COLS - 1) * (GRID_ROWS - 1)
    used = {i for tri in table.triangles for i in tri}
    assert used == set(range(LANDMARK_COUNT))
