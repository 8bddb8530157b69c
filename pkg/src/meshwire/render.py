"""Static wireframe rendering of landmark frames.

SVG is the primary output because it is diffable text; PPM is offered
for pixel tooling. The pipeline per frame: apply calibration, build the
double-sided mesh, project every vertex, draw each triangle's edges.
Vertices that cannot be projected (degenerate depth, non-finite input)
are culled together with every triangle touching them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .facemesh import (
    CalibrationState,
    IDENTITY_CALIBRATION,
    LandmarkFrame,
    TessellationTable,
    apply_calibration,
    build_mesh,
)
from .geometry import (
    CameraPose,
    EulerAngles,
    Vec3,
    camera_matrix,
)

# Default view: camera on +z looking back at the origin with a virtual
# surface one unit in front of it, which keeps the image upright and
# unmirrored while the face normal points at the viewer.
DEFAULT_CAMERA = CameraPose(
    position=Vec3(0.0, 0.0, 3.0),
    orientation=EulerAngles(0.0, 0.0, 0.0),
    surface=Vec3(0.0, 0.0, -1.0),
)


@dataclass(frozen=True)
class RenderConfig:
    width: int = 512
    height: int = 512
    pixels_per_unit: float = 900.0
    camera: CameraPose = DEFAULT_CAMERA
    stroke: str = "#1a2633"
    background: str = "#ffffff"


def project_vertices(frame: LandmarkFrame, config: RenderConfig):
    """Project every vertex to pixel coordinates; None where culled."""
    mat = camera_matrix(config.camera)
    cx, cy = config.width / 2.0, config.height / 2.0
    pos = config.camera.position
    out = []
    for x, y, z in frame.points:
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            out.append(None)
            continue
        p = Vec3(float(x), float(y), float(z)) - pos
        f = mat.apply(p)
        if abs(f.z) < 1e-12:
            out.append(None)
            continue
        bx, by = f.x / f.z, f.y / f.z
        out.append((cx + bx * config.pixels_per_unit, cy - by * config.pixels_per_unit))
    return out


def render_frame_svg(
    frame: LandmarkFrame,
    table: TessellationTable,
    calibration: CalibrationState = IDENTITY_CALIBRATION,
    config: RenderConfig = RenderConfig(),
) -> str:
    adjusted = apply_calibration(calibration, frame)
    mesh = build_mesh(adjusted, table)
    pixels = project_vertices(adjusted, config)
    paths = []
    for a, b, c in mesh.triangles:
        pa, pb, pc = pixels[a], pixels[b], pixels[c]
        if pa is None or pb is None or pc is None:
            continue
        paths.append(
            f'<path d="M{pa[0]:.2f} {pa[1]:.2f} L{pb[0]:.2f} {pb[1]:.2f} '
            f'L{pc[0]:.2f} {pc[1]:.2f} Z"/>'
        )
    body = "\n".join(paths)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{config.width}" '
        f'height="{config.height}" viewBox="0 0 {config.width} {config.height}">\n'
        f'<rect width="100%" height="100%" fill="{config.background}"/>\n'
        f'<g fill="none" stroke="{config.stroke}" stroke-width="0.6">\n'
        f"{body}\n"
        f"</g>\n</svg>\n"
    )


def render_frame_ppm(
    frame: LandmarkFrame,
    table: TessellationTable,
    calibration: CalibrationState = IDENTITY_CALIBRATION,
    config: RenderConfig = RenderConfig(),
) -> bytes:
    """Binary P6 raster with 1-pixel wireframe lines."""
    adjusted = apply_calibration(calibration, frame)
    mesh = build_mesh(adjusted, table)
    pixels = project_vertices(adjusted, config)
    w, h = config.width, config.height
    canvas = bytearray(b"\xff" * (w * h * 3))

    def plot(x: int, y: int) -> None:
        if 0 <= x < w and 0 <= y < h:
            i = (y * w + x) * 3
            canvas[i : i + 3] = b"\x1a\x26\x33"

    def line(p0, p1) -> None:
        x0, y0 = int(round(p0[0])), int(round(p0[1]))
        x1, y1 = int(round(p1[0])), int(round(p1[1]))
        dx, dy = abs(x1 - x0), -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        while True:
            plot(x0, y0)
            if x0 == x1 and y0 == y1:
                return
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy

    for a, b, c in mesh.triangles:
        pa, pb, pc = pixels[a], pixels[b], pixels[c]
        if pa is None or pb is None or pc is None:
            continue
        line(pa, pb)
        line(pb, pc)
        line(pc, pa)
    return b"P6\n%d %d\n255\n" % (w, h) + bytes(canvas)


def render_recording(
    frames,
    table: TessellationTable,
    out_dir,
    calibration: CalibrationState = IDENTITY_CALIBRATION,
    config: RenderConfig = RenderConfig(),
    image_format: str = "svg",
) -> list[str]:
    """Render every frame to out_dir; returns the written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        name = os.path.join(out_dir, f"frame_{i:05d}.{image_format}")
        if image_format == "svg":
            data = render_frame_svg(frame, table, calibration, config).encode("ascii")
        elif image_format == "ppm":
            data = render_frame_ppm(frame, table, calibration, config)
        else:
            raise ValueError(f"unknown image format {image_format!r}")
        with open(name, "wb") as fh:
            fh.write(data)
        written.append(name)
    return written
