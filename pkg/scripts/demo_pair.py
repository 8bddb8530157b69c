#!/usr/bin/env python3
"""Placement transparency demo.

Runs the same seeded two-client session twice: once on a single-instance
cluster and once on a two-instance cluster where the dispatcher forces
the guest onto a different instance than the room owner, so every
signaling message crosses the inter-instance proxy. Prints both reports
and checks that the normalized client transcripts are identical, which
is the whole point: clients cannot tell where their room lives.

Usage:
    python3 scripts/demo_pair.py [--seed N] [--frames N] [--fps N]
"""

import argparse
import asyncio
import sys

from meshwire.client import normalize_transcript, proxies_probe_for, run_pair
from meshwire.cluster import spawn_cluster
from meshwire.synth import generate_frames


async def run_placement(n_instances: int, seed: int, frames: int, fps: float):
    cluster = await spawn_cluster(n_instances, seed=seed)
    try:
        urls = [f"http://{inst.host}:{inst.port}/healthz" for inst in cluster.instances]
        return await run_pair(
            cluster.ws_url,
            generate_frames("nod", frames, fps=fps),
            generate_frames("shake", frames, fps=fps),
            fps_cap=fps,
            seed=seed,
            proxies_probe=proxies_probe_for(urls),
        )
    finally:
        await cluster.stop()


async def demo(seed: int, frames: int, fps: float) -> int:
    print(f"seed={seed} frames={frames} fps={fps}")
    single = await run_placement(1, seed, frames, fps)
    split = await run_placement(2, seed, frames, fps)

    for label, result in (("1 instance", single), ("2 instances, split", split)):
        r = result.owner
        print(f"\n[{label}] room {result.room}, proxied={r.proxied}")
        print(f"  owner: sent {r.frames_sent}, received {r.frames_received}, "
              f"{r.bytes_per_second:.0f} B/s, establish {r.establish_ms:.0f} ms")
        g = result.guest
        print(f"  guest: sent {g.frames_sent}, received {g.frames_received}, "
              f"{g.bytes_per_second:.0f} B/s, establish {g.establish_ms:.0f} ms")

    same = (normalize_transcript(single.owner_transcript) == normalize_transcript(split.owner_transcript)
            and normalize_transcript(single.guest_transcript) == normalize_transcript(split.guest_transcript))
    print(f"\nclient transcripts identical across placements: {same}")
    return 0 if same else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--frames", type=int, default=90)
    parser.add_argument("--fps", type=float, default=30.0)
    args = parser.parse_args(argv)
    return asyncio.run(demo(args.seed, args.frames, args.fps))


if __name__ == "__main__":
    sys.exit(main())
