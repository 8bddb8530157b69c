#!/usr/bin/env python3
"""Offline avatar pipeline: synthesize, record, calibrate, render.

Generates a synthetic head-motion recording, derives a calibration
profile from its first frame, renders the recording to wireframe SVG
images with the calibration applied, and prints the wire cost of
streaming it. Everything lands under --out-dir.

Usage:
    python3 scripts/avatar_pipeline.py --out-dir /tmp/avatar [--motion orbit]
"""

import argparse
import pathlib
import sys

from meshwire.codec import FRAME_SIZE, budget, encode_frame
from meshwire.facemesh import calibrate, write_calibration_file, write_recording
from meshwire.render import RenderConfig, render_frame_svg
from meshwire.synth import MOTIONS, generate_frames, grid_tessellation


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--motion", choices=MOTIONS, default="orbit")
    parser.add_argument("--frames", type=int, default=60)
    parser.add_argument("--fps", type=float, default=30.0)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--every", type=int, default=10,
                        help="render every Nth frame")
    args = parser.parse_args(argv)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    frames = generate_frames(args.motion, args.frames, fps=args.fps,
                             noise=args.noise, seed=args.seed)
    recording = out / f"{args.motion}.rec"
    write_recording(recording, frames)
    print(f"wrote {recording} ({len(frames)} frames)")

    state = calibrate(frames[0])
    profile = out / "calibration.profile"
    write_calibration_file(profile, state)
    print(f"wrote {profile}")

    table = grid_tessellation()
    config = RenderConfig()
    rendered = 0
    for index in range(0, len(frames), args.every):
        svg = render_frame_svg(frames[index], table, state, config)
        (out / f"frame_{index:05d}.svg").write_text(svg)
        rendered += 1
    print(f"rendered {rendered} wireframes to {out}")

    packet = encode_frame(frames[0].points)
    rate = budget(args.fps, len(packet))
    print(f"wire cost: {len(packet)} B/frame (expected {FRAME_SIZE}), "
          f"{rate.bytes_per_second} B/s at {args.fps:g} fps")
    return 0


if __name__ == "__main__":
    sys.exit(main())
