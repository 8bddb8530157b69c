"""Command line front end.

Verbs:
    serve          run one signaling instance
    cluster        run n instances behind a round-robin dispatcher
    client         connect to a signaling service and stream as owner or guest
    bench          loopback throughput bench against the pace budget
    gen-recording  write a synthetic landmark recording
    calibrate      derive a calibration profile from a recording frame
    render         draw a recording to SVG or PPM wireframes

Exit codes: 0 success; 10-19 signaling (10 + wire error code for codes
1-5); 20-29 peer transport; 30-39 input data.
"""

from __future__ import annotations

import argparse
import asyncio
import random
import sys

from .client import (
    SignalingError,
    guest_stream,
    loopback_bench,
    owner_stream,
)
from .cluster import spawn_cluster
from .codec import CodecError, h264_reference_rate
from .directory import make_store
from .facemesh import (
    FacemeshError,
    IDENTITY_CALIBRATION,
    LandmarkFrame,
    MalformedProfile,
    MalformedTable,
    UnreadableRecording,
    calibrate,
    load_tessellation,
    read_calibration_file,
    read_recording,
    write_calibration_file,
    write_recording,
)
from .instance import SignalInstance
from .peer import (
    AllCandidatesFailed,
    ChannelClosed,
    EstablishTimeout,
    NoUsableEndpoint,
    OversizedMessage,
    PeerError,
    TokenMismatch,
    VersionMismatch,
)
from .render import RenderConfig, render_recording
from .synth import MOTIONS, generate_frames, endless_frames, grid_tessellation

NETWORK_VERBS = {"serve", "cluster", "client", "bench"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshwire", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="seed for all randomness (room ids, tokens, synth noise)")

    motion = argparse.ArgumentParser(add_help=False)
    motion.add_argument("--motion", choices=MOTIONS, default="nod")
    motion.add_argument("--frames", type=int, default=300)
    motion.add_argument("--fps", type=float, default=30.0)
    motion.add_argument("--noise", type=float, default=0.0)

    p = sub.add_parser("serve", parents=[common], help="run one signaling instance")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--proxy-port", type=int, default=0)
    p.add_argument("--instance-id", default="i0")
    p.add_argument("--store", choices=("memory", "file"), default="memory")
    p.add_argument("--store-path", default=None)
    p.add_argument("--room-ttl", type=float, default=600.0)
    p.add_argument("--web-root", default=None, help="directory of static files to serve")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("cluster", parents=[common],
                       help="run multiple instances behind a dispatcher")
    p.add_argument("--instances", type=int, default=2)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8760, help="dispatcher port")
    p.add_argument("--store", choices=("memory", "file"), default="file")
    p.add_argument("--store-path", default=None)
    p.add_argument("--room-ttl", type=float, default=600.0)
    p.add_argument("--web-root", default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("client", parents=[common, motion],
                       help="stream against a signaling service")
    p.add_argument("--url", required=True, help="signaling URL, e.g. ws://127.0.0.1:8760/ws")
    p.add_argument("--role", choices=("owner", "guest"), required=True)
    p.add_argument("--room", default=None, help="room id to join (guest)")
    p.add_argument("--recording", default=None, help="stream this recording instead of synthetic frames")
    p.add_argument("--save-received", default=None, help="write received frames to this recording")
    p.add_argument("--join-timeout", type=float, default=300.0,
                   help="owner: how long to wait for a guest")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("bench", parents=[common],
                       help="loopback throughput bench")
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--motion", choices=MOTIONS, default="orbit")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-recording", parents=[common, motion],
                       help="write a synthetic landmark recording")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_recording)

    p = sub.add_parser("calibrate", parents=[common],
                       help="derive a calibration profile from a recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frame", type=int, default=0, help="frame index to calibrate on")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("render", parents=[common],
                       help="render a recording to wireframe images")
    p.add_argument("--recording", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("svg", "ppm"), default="svg")
    p.add_argument("--table", default=None, help="tessellation file (default: full synthetic grid)")
    p.add_argument("--calibration", default=None, help="calibration profile to apply")
    p.add_argument("--auto-calibrate", action="store_true",
                   help="calibrate on the first frame before rendering")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.set_defaults(func=cmd_render)

    return parser


# ---------------------------------------------------------------------------
# verb implementations


async def _wait_forever() -> None:
    await asyncio.Event().wait()


def cmd_serve(args) -> int:
    async def run() -> int:
        store = make_store(args.store, args.store_path)
        inst = SignalInstance(
            store, host=args.host, port=args.port, proxy_port=args.proxy_port,
            instance_id=args.instance_id, seed=args.seed,
            room_ttl=args.room_ttl, web_root=args.web_root,
        )
        await inst.start()
        print(f"signaling at {inst.ws_url}", flush=True)
        print(f"health at http://{inst.host}:{inst.port}/healthz", flush=True)
        try:
            await _wait_forever()
        finally:
            await inst.stop()
        return 0

    return asyncio.run(run())


def cmd_cluster(args) -> int:
    async def run() -> int:
        handle = await spawn_cluster(
            args.instances, args.store, args.store_path, host=args.host,
            seed=args.seed, room_ttl=args.room_ttl, web_root=args.web_root,
            dispatcher_port=args.port,
        )
        print(f"dispatcher at {handle.ws_url}", flush=True)
        for inst in handle.instances:
            print(f"  {inst.instance_id}: {inst.ws_url} "
                  f"health http://{inst.host}:{inst.port}/healthz", flush=True)
        try:
            await _wait_forever()
        finally:
            await handle.stop()
        return 0

    return asyncio.run(run())


def _load_frames(args) -> list[LandmarkFrame]:
    if getattr(args, "recording", None):
        return read_recording(args.recording)
    seed = args.seed if args.seed is not None else 0
    return generate_frames(args.motion, args.frames, fps=args.fps,
                           noise=args.noise, seed=seed)


def cmd_client(args) -> int:
    frames = _load_frames(args)
    sink: list = []

    async def run():
        if args.role == "owner":
            rng = random.Random(args.seed) if args.seed is not None else None
            return await owner_stream(
                args.url, frames, fps_cap=args.fps, rng=rng,
                on_room=lambda room: print(f"room {room}", flush=True),
                join_timeout=args.join_timeout,
                received_sink=sink if args.save_received else None,
            )
        if not args.room:
            raise SystemExit("guest needs --room")
        return await guest_stream(
            args.url, args.room, frames, fps_cap=args.fps,
            received_sink=sink if args.save_received else None,
        )

    report, _transcript = asyncio.run(run())
    if args.save_received:
        received = [LandmarkFrame(d.coords, d.timestamp_ms) for d in sink]
        write_recording(args.save_received, received)
    print(report.to_json() if args.json else report.to_text())
    return 0


def cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else 0
    source = endless_frames(args.motion, fps=240.0, seed=seed)
    result = asyncio.run(loopback_bench(source, fps_cap=args.fps, duration_s=args.seconds))
    print(result.to_text())
    print(f"video_reference_bytes_per_second = {h264_reference_rate(1080, 1920, 3, 30.0, 2000.0)}")
    return 0


def cmd_gen_recording(args) -> int:
    frames = _load_frames(args)
    write_recording(args.out, frames)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    frames = read_recording(args.recording)
    if not 0 <= args.frame < len(frames):
        raise UnreadableRecording(f"frame {args.frame} out of range ({len(frames)} frames)")
    state = calibrate(frames[args.frame])
    write_calibration_file(args.out, state)
    print(f"calibration from frame {args.frame} written to {args.out}")
    return 0


def cmd_render(args) -> int:
    frames = read_recording(args.recording)
    table = load_tessellation(args.table) if args.table else grid_tessellation()
    if args.auto_calibrate:
        if not frames:
            raise UnreadableRecording("empty recording")
        calibration = calibrate(frames[0])
    elif args.calibration:
        calibration = read_calibration_file(args.calibration)
    else:
        calibration = IDENTITY_CALIBRATION
    config = RenderConfig(width=args.width, height=args.height)
    written = render_recording(frames, table, args.out_dir, calibration, config,
                               image_format=args.format)
    print(f"wrote {len(written)} {args.format} frames to {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# exit code mapping


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 0
    except SignalingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 10 + exc.code if 1 <= exc.code <= 5 else 10
    except NoUsableEndpoint as exc:
        return _fail(exc, 21)
    except AllCandidatesFailed as exc:
        return _fail(exc, 21)
    except VersionMismatch as exc:
        return _fail(exc, 22)
    except TokenMismatch as exc:
        return _fail(exc, 23)
    except EstablishTimeout as exc:
        return _fail(exc, 24)
    except ChannelClosed as exc:
        return _fail(exc, 25)
    except OversizedMessage as exc:
        return _fail(exc, 26)
    except PeerError as exc:
        return _fail(exc, 20)
    except asyncio.TimeoutError as exc:
        print(f"error: timed out: {exc}", file=sys.stderr)
        return 10
    except UnreadableRecording as exc:
        return _fail(exc, 32)
    except MalformedProfile as exc:
        return _fail(exc, 33)
    except MalformedTable as exc:
        return _fail(exc, 34)
    except FacemeshError as exc:
        return _fail(exc, 30)
    except CodecError as exc:
        return _fail(exc, 35)
    except FileNotFoundError as exc:
        return _fail(exc, 31)
    except OSError as exc:
        # network verbs hit this on unreachable services, file verbs on disk trouble
        return _fail(exc, 10 if args.verb in NETWORK_VERBS else 31)


def _fail(exc: BaseException, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
