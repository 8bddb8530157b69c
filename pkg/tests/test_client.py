import asyncio
import random

import numpy as np
import pytest

from meshwire import protocol
from meshwire.client import (
    RunReport,
    SignalingClient,
    SignalingError,
    _StreamStats,
    guest_stream,
    loopback_bench,
    normalize_transcript,
    owner_stream,
    proxies_probe_for,
    receive_stream,
    run_pair,
    send_stream,
)
from meshwire.cluster import spawn_cluster
from meshwire.codec import FRAME_SIZE, budget
from meshwire.peer import PeerListener, PeerOffer, accept_offer, encode_candidate, encode_offer
from meshwire.synth import endless_frames, generate_frames
from support import run_async


# -- transcript normalization --------------------------------------------------


def test_ports_masked_only_in_negotiation_bodies():
    import json

    offer_doc = protocol.msg_blob(
        "offer",
        encode_offer(PeerOffer(b"\xab" * 16, ("127.0.0.1:41293", "10.0.0.2:999"))),
    )
    lines = normalize_transcript([("send", offer_doc), ("recv", protocol.msg_room_created("90"))])
    direction, masked = lines[0].split(" ", 1)
    body = json.loads(protocol.body_to_blob(json.loads(masked)["body"]))
    assert body["endpoints"] == ["127.0.0.1:0", "10.0.0.2:0"]
    assert body["token"] == "ab" * 16  # token survives verbatim
    assert lines[1] == 'recv {"room":"90","type":"room_created"}'


def test_non_negotiation_docs_untouched():
    doc = {"type": "peer_joined", "room": "127.0.0.1:4129"}
    assert normalize_transcript([("recv", doc)]) == [
        'recv {"room":"127.0.0.1:4129","type":"peer_joined"}'
    ]


def test_opaque_bodies_left_alone():
    doc = protocol.msg_blob("offer", b"\x00\x01 not json")
    (line,) = normalize_transcript([("send", doc)])
    assert doc["body"] in line


def test_identical_runs_compare_equal():
    entries = [
        ("send", protocol.msg_create_room()),
        ("recv", protocol.msg_room_created("7")),
    ]
    assert normalize_transcript(entries) == normalize_transcript(list(entries))


# -- reports ---------------------------------------------------------------------


def test_report_json_round_trip():
    report = RunReport(
        role="owner", room="90", frames_offered=30, frames_sent=30,
        frames_received=30, bytes_received=30 * FRAME_SIZE,
        bytes_per_second=85140.0, mean_roundtrip_error=1e-4,
        max_roundtrip_error=4e-4, establish_ms=12.5, proxied="no",
    )
    assert RunReport.from_json(report.to_json()) == report
    assert "bytes_per_second = 85140.0" in report.to_text()


# -- streaming over a raw peer pair ----------------------------------------------


def test_send_receive_round_trip_with_sink():
    async def scenario():
        listener = await PeerListener(rng=random.Random(2)).start()
        offer = listener.make_offer()
        answer, guest_channel = await accept_offer(offer)
        owner_channel = await listener.establish(offer, answer, timeout=2.0)
        frames = generate_frames("nod", 5, noise=0.01, seed=8)
        sink: list = []
        stats = _StreamStats()
        recv_stats = _StreamStats()
        try:
            receiver = asyncio.create_task(receive_stream(guest_channel, recv_stats, sink=sink))
            await send_stream(owner_channel, frames, 120.0, stats)
            await asyncio.wait_for(receiver, 5.0)
        finally:
            await owner_channel.close()
            await guest_channel.close()
            await listener.stop()

        assert stats.sent == 5 and recv_stats.received == 5
        assert len(sink) == 5
        assert sink[-1].end_of_stream
        assert not sink[0].end_of_stream
        assert [d.timestamp_ms for d in sink] == [f.timestamp_ms for f in frames]
        for decoded, frame in zip(sink, frames):
            # half precision: truncated toward zero, within a part in 2^10
            assert np.all(np.abs(decoded.coords) <= np.abs(frame.points))
            assert np.max(np.abs(decoded.coords - frame.points)) < 2e-3

    run_async(scenario())


# -- full sessions ---------------------------------------------------------------


def test_run_pair_single_instance():
    async def scenario():
        cluster = await spawn_cluster(1, seed=70)
        try:
            urls = [f"http://{i.host}:{i.port}/healthz" for i in cluster.instances]
            result = await run_pair(
                cluster.ws_url,
                generate_frames("nod", 12),
                generate_frames("shake", 12),
                fps_cap=60.0,
                seed=70,
                proxies_probe=proxies_probe_for(urls),
            )
        finally:
            await cluster.stop()

        assert result.owner.role == "owner" and result.guest.role == "guest"
        assert result.owner.room == result.guest.room == result.room
        assert result.owner.frames_sent == 12
        assert result.guest.frames_sent == 12
        assert result.owner.frames_received == 12
        assert result.guest.frames_received == 12
        assert result.owner.bytes_received == 12 * FRAME_SIZE
        assert result.owner.proxied == "no"
        assert result.guest.proxied == "no"
        assert 0 < result.owner.establish_ms < 2000.0
        assert result.owner.max_roundtrip_error < 2e-3

        owner_lines = normalize_transcript(result.owner_transcript)
        assert owner_lines[0] == 'send {"type":"create_room"}'
        assert owner_lines[-1] == 'send {"type":"hang_up"}'
        guest_lines = normalize_transcript(result.guest_transcript)
        assert guest_lines[0].startswith('send {"room":')
        assert 'recv {"type":"established"}' in guest_lines

    run_async(scenario())


def test_run_pair_seeded_runs_match():
    async def scenario():
        transcripts = []
        for attempt in range(2):
            cluster = await spawn_cluster(1, seed=71)
            try:
                result = await run_pair(
                    cluster.ws_url,
                    generate_frames("still", 4),
                    generate_frames("still", 4),
                    fps_cap=120.0,
                    seed=71,
                )
            finally:
                await cluster.stop()
            transcripts.append(
                (
                    normalize_transcript(result.owner_transcript),
                    normalize_transcript(result.guest_transcript),
                    result.room,
                )
            )
        assert transcripts[0] == transcripts[1]

    run_async(scenario())


def test_run_pair_mid_stream_hook_fires_after_both_started():
    async def scenario():
        cluster = await spawn_cluster(1, seed=72)
        fired = asyncio.Event()

        async def hook():
            fired.set()

        try:
            result = await run_pair(
                cluster.ws_url,
                generate_frames("nod", 10),
                generate_frames("nod", 10),
                fps_cap=120.0,
                seed=72,
                mid_stream=hook,
            )
        finally:
            await cluster.stop()
        assert fired.is_set()
        assert result.owner.frames_received == 10
        assert result.guest.frames_received == 10

    run_async(scenario())


def test_owner_alone_times_out():
    async def scenario():
        cluster = await spawn_cluster(1, seed=73)
        try:
            with pytest.raises(asyncio.TimeoutError):
                await owner_stream(
                    cluster.ws_url, generate_frames("still", 2), join_timeout=0.3
                )
        finally:
            await cluster.stop()

    run_async(scenario())


def test_guest_join_unknown_room():
    async def scenario():
        cluster = await spawn_cluster(1, seed=74)
        try:
            with pytest.raises(SignalingError) as err:
                await guest_stream(cluster.ws_url, "000000", generate_frames("still", 2))
            assert err.value.code == 1
        finally:
            await cluster.stop()

    run_async(scenario())


def test_trickled_candidate_rescues_the_dial():
    """First offer lists only a dead endpoint; a later ice_candidate
    carries the live one and the guest retries with it."""

    async def owner_script(ws_url, room_box, frames):
        signaling = SignalingClient(ws_url)
        listener = await PeerListener(rng=random.Random(1)).start()
        await signaling.connect()
        try:
            await signaling.send(protocol.msg_create_room())
            room_box.set_result((await signaling.recv_type("room_created"))["room"])
            await signaling.recv_type("peer_joined", timeout=10.0)
            real = listener.make_offer()
            decoy = PeerOffer(real.session_token, ("127.0.0.1:1",))
            await signaling.send(protocol.msg_blob("offer", encode_offer(decoy)))
            await asyncio.sleep(0.3)  # let the dead dial fail first
            await signaling.send(
                protocol.msg_blob(
                    "ice_candidate",
                    encode_candidate(real.session_token, real.endpoints[0]),
                )
            )
            doc = await signaling.recv_type("answer", timeout=10.0)
            from meshwire.peer import decode_answer

            answer = decode_answer(protocol.body_to_blob(doc["body"]))
            channel = await listener.establish(real, answer, timeout=5.0)
            await signaling.send(protocol.msg_established())
            await signaling.send(protocol.msg_hang_up())
        finally:
            await signaling.close()
        stats = _StreamStats()
        receiver = asyncio.create_task(receive_stream(channel, stats))
        await send_stream(channel, frames, 120.0, stats)
        await asyncio.wait_for(receiver, 10.0)
        await channel.close()
        await listener.stop()
        return stats

    async def scenario():
        cluster = await spawn_cluster(1, seed=75)
        loop = asyncio.get_running_loop()
        room_box = loop.create_future()
        try:
            owner_task = asyncio.create_task(
                owner_script(cluster.ws_url, room_box, generate_frames("still", 3))
            )
            room = await asyncio.wait_for(room_box, 5.0)
            guest_report, guest_transcript = await guest_stream(
                cluster.ws_url, room, generate_frames("still", 3), fps_cap=120.0
            )
            owner_stats = await asyncio.wait_for(owner_task, 15.0)
        finally:
            await cluster.stop()

        assert guest_report.frames_received == 3
        assert owner_stats.received == 3
        types = [doc["type"] for direction, doc in guest_transcript if direction == "recv"]
        assert "ice_candidate" in types

    run_async(scenario())


# -- loopback bench ----------------------------------------------------------------


def test_loopback_bench_short_window():
    async def scenario():
        return await loopback_bench(endless_frames("nod"), fps_cap=30.0, duration_s=1.5)

    result = run_async(scenario())
    assert result.budget_bytes_per_second == budget(30.0).bytes_per_second == 85140
    assert result.frames_received == result.frames_sent
    assert 40 <= result.frames_sent <= 50  # ~45 at 30 fps in 1.5 s
    assert result.frames_offered > result.frames_sent  # the pacer dropped extras
    # short window: generous tolerance, the 10 s acceptance run tightens it
    assert abs(result.bytes_per_second - 85140) / 85140 < 0.15
