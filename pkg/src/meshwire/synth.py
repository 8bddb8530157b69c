"""Synthetic landmark streams standing in for a live face tracker.

The canonical face is 468 points on an ellipsoid patch arranged as a
26 x 18 grid, with the four semantic landmarks pinned to fixed spots so
the calibration math sees a centered, upright, exactly-orthogonal face
at frame 0:

    center nose (5)    -> (0, 0, 0)
    lower nose (1)     -> (0, -0.5, 0)
    left eyelash (52)  -> (-0.5, 0.5, 0)
    right eyelash (282)-> (0.5, 0.5, 0)

The patch shape itself is arbitrary but frozen: tests and golden files
depend on it byte-for-byte.
"""

from __future__ import annotations

import math

import numpy as np

from .facemesh import (
    LANDMARK_COUNT,
    CENTER_NOSE,
    LOWER_NOSE,
    LEFT_EYELASH,
    RIGHT_EYELASH,
    LandmarkFrame,
    TessellationTable,
)

GRID_COLS = 26
GRID_ROWS = 18

MOTIONS = ("still", "nod", "shake", "orbit")

_PINNED = {
    CENTER_NOSE: (0.0, 0.0, 0.0),
    LOWER_NOSE: (0.0, -0.5, 0.0),
    LEFT_EYELASH: (-0.5, 0.5, 0.0),
    RIGHT_EYELASH: (0.5, 0.5, 0.0),
}


def canonical_face() -> np.ndarray:
    """The frozen canonical 468-point face, shape (468, 3)."""
    points = np.empty((LANDMARK_COUNT, 3), dtype=np.float64)
    for r in range(GRID_ROWS):
        for c in range(GRID_COLS):
            u = c / (GRID_COLS - 1) - 0.5  # -0.5 .. 0.5 across the face
            v = r / (GRID_ROWS - 1) - 0.5  # -0.5 .. 0.5 chin to brow
            az = u * math.pi * 0.8
            el = v * math.pi * 0.7
            x = 0.6 * math.sin(az) * math.cos(el)
            y = 0.8 * math.sin(el)
            z = 0.45 * math.cos(az) * math.cos(el) - 0.25
            points[r * GRID_COLS + c] = (x, y, z)
    for idx, pos in _PINNED.items():
        points[idx] = pos
    return points


def grid_tessellation() -> TessellationTable:
    """Full triangulation of the synthetic grid: two triangles per cell,
    wound counter-clockwise seen from +z (the outward side)."""
    triangles = []
    for r in range(GRID_ROWS - 1):
        for c in range(GRID_COLS - 1):
            a = r * GRID_COLS + c
            b = a + 1
            d = a + GRID_COLS
            e = d + 1
            triangles.append((a, b, d))
            triangles.append((b, e, d))
    return TessellationTable(triangles=tuple(triangles))


def _rotation_about_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _rotation_about_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def generate_frames(
    kind: str,
    frames: int,
    fps: float = 30.0,
    amplitude_deg: float = 20.0,
    period_s: float = 2.0,
    orbit_radius: float = 0.3,
    noise: float = 0.0,
    seed: int = 0,
) -> list[LandmarkFrame]:
    """Generate a rigid-motion animation of the canonical face.

    kind: still | nod (pitch about x) | shake (yaw about y) | orbit
    (circular translation in the xy plane). The motion phase is a sine,
    so frame 0 is always the exact canonical pose. Gaussian noise, when
    requested, is seeded and applied after the motion.
    """
    if kind not in MOTIONS:
        raise ValueError(f"unknown motion {kind!r}; pick one of {MOTIONS}")
    if frames < 1:
        raise ValueError("need at least one frame")
    base = canonical_face()
    rng = np.random.default_rng(seed)
    amplitude = math.radians(amplitude_deg)
    out = []
    for i in range(frames):
        t = i / fps
        ts_ms = round(i * 1000.0 / fps)
        phase = math.sin(2.0 * math.pi * t / period_s)
        if kind == "still":
            pts = base.copy()
        elif kind == "nod":
            pts = base @ _rotation_about_x(amplitude * phase).T
        elif kind == "shake":
            pts = base @ _rotation_about_y(amplitude * phase).T
        else:  # orbit
            angle = 2.0 * math.pi * t / period_s
            offset = np.array(
                [orbit_radius * (math.cos(angle) - 1.0), orbit_radius * math.sin(angle), 0.0]
            )
            pts = base + offset
        if noise > 0:
            pts = pts + rng.normal(0.0, noise, size=pts.shape)
        out.append(LandmarkFrame(pts, ts_ms))
    return out


def endless_frames(kind: str, fps: float = 30.0, seed: int = 0, **kwargs):
    """Unbounded frame generator for duration-driven runs (benchmarks)."""
    chunk = 256
    i = 0
    while True:
        for frame in generate_frames(kind, chunk, fps=fps, seed=seed + i, **kwargs):
            shifted = LandmarkFrame(frame.points, frame.timestamp_ms + round(i * chunk * 1000.0 / fps))
            yield shifted
        i += 1
