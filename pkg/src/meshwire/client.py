"""Signaling clients and the frame streaming session driver.

A pair of clients meets in a room, negotiates a peer channel through
the signaling path, hangs up, and streams mesh packets directly:

    owner: create_room -> wait peer_joined -> send offer -> recv answer
           -> channel up -> send established -> hang_up -> stream
    guest: join_room -> recv offer -> dial candidates -> send answer
           -> recv established -> hang_up -> stream

Every signaling document a client sends or receives is recorded in a
transcript. Transcripts can be normalized (listener ports masked, they
are assigned by the OS) so two runs of the same seeded scenario can be
compared byte for byte.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import random
import time
import urllib.request
from dataclasses import asdict, dataclass
from typing import Awaitable, Callable, Iterable, Sequence

import numpy as np
from websockets.asyncio.client import connect as ws_connect

from . import protocol
from .codec import (
    FLAG_END_OF_STREAM,
    FRAME_SIZE,
    IDENTITY_POSE,
    FramePacer,
    MeshPose,
    budget,
    decode_frame,
    encode_frame,
)
from .facemesh import LandmarkFrame
from .peer import (
    CHANNEL_DATA,
    AllCandidatesFailed,
    ChannelClosed,
    PeerChannel,
    PeerListener,
    accept_offer,
    decode_answer,
    decode_negotiation,
    decode_offer,
    encode_answer,
    encode_offer,
)

DEFAULT_FPS_CAP = 30.0
RECV_TIMEOUT = 5.0
JOIN_TIMEOUT = 30.0

_NEGOTIATION_TYPES = (protocol.OFFER, protocol.ANSWER, protocol.ICE_CANDIDATE)


class SignalingError(Exception):
    """Error document received from the signaling service."""

    def __init__(self, code: int, text: str = ""):
        super().__init__(f"signaling error {code}: {text}")
        self.code = code
        self.text = text


class SignalingClient:
    """One websocket connection to the signaling service, with a
    transcript of every document crossing it."""

    def __init__(self, ws_url: str):
        self.ws_url = ws_url
        self.transcript: list[tuple[str, dict]] = []
        self._conn = None

    async def connect(self) -> "SignalingClient":
        self._conn = await ws_connect(self.ws_url)
        return self

    async def send(self, doc: dict) -> None:
        self.transcript.append(("send", doc))
        await self._conn.send(protocol.encode_doc(doc))

    async def recv(self, timeout: float = RECV_TIMEOUT) -> dict:
        raw = await asyncio.wait_for(self._conn.recv(), timeout)
        doc = protocol.decode_doc(raw)
        self.transcript.append(("recv", doc))
        return doc

    async def recv_type(self, *types: str, timeout: float = RECV_TIMEOUT) -> dict:
        """Receive until a document of one of the wanted types arrives.

        Error documents raise; other unexpected types are recorded and
        skipped (the transcript still sees them)."""
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise asyncio.TimeoutError(f"timed out waiting for {types}")
            doc = await self.recv(timeout=remaining)
            if doc["type"] == protocol.ERROR:
                raise SignalingError(int(doc.get("code", 0)), str(doc.get("text", "")))
            if doc["type"] in types:
                return doc

    async def close(self) -> None:
        if self._conn is not None:
            try:
                await self._conn.close()
            except (ConnectionError, OSError):
                pass


def _mask_endpoint_ports(doc: dict) -> dict:
    if doc.get("type") not in _NEGOTIATION_TYPES or "body" not in doc:
        return doc
    try:
        neg = json.loads(protocol.body_to_blob(doc["body"]).decode("ascii"))
        endpoints = neg.get("endpoints")
        if not isinstance(endpoints, list):
            return doc
        neg["endpoints"] = [ep.rsplit(":", 1)[0] + ":0" for ep in endpoints]
        blob = json.dumps(neg, sort_keys=True, separators=(",", ":")).encode("ascii")
    except (ValueError, KeyError, AttributeError):
        return doc
    masked = dict(doc)
    masked["body"] = protocol.blob_to_body(blob)
    return masked


def normalize_transcript(entries: Sequence[tuple[str, dict]]) -> list[str]:
    """Canonical per-direction lines with OS-assigned ports masked.

    Room ids, tokens, and everything else compare verbatim; only the
    listener ports inside negotiation bodies vary between identical
    seeded runs."""
    return [f"{direction} {protocol.encode_doc(_mask_endpoint_ports(doc))}"
            for direction, doc in entries]


# ---------------------------------------------------------------------------
# streaming session


@dataclass
class _StreamStats:
    offered: int = 0
    sent: int = 0
    received: int = 0
    bytes_received: int = 0
    first_recv_t: float | None = None
    last_recv_t: float | None = None
    err_sum: float = 0.0
    err_count: int = 0
    err_max: float = 0.0

    def on_send(self, packet: bytes, original: np.ndarray) -> None:
        # sender-side round trip: decode our own packet and compare
        decoded = decode_frame(packet)
        err = np.abs(decoded.coords - original)
        self.err_sum += float(err.sum())
        self.err_count += err.size
        self.err_max = max(self.err_max, float(err.max()))

    def on_receive(self, nbytes: int, now: float) -> None:
        self.received += 1
        self.bytes_received += nbytes
        if self.first_recv_t is None:
            self.first_recv_t = now
        self.last_recv_t = now

    @property
    def bytes_per_second(self) -> float:
        """Inter-arrival estimate: the first frame opens the window, so
        its bytes are excluded from the numerator."""
        if (
            self.received < 2
            or self.first_recv_t is None
            or self.last_recv_t is None
            or self.last_recv_t <= self.first_recv_t
        ):
            return 0.0
        return (self.bytes_received - FRAME_SIZE) / (self.last_recv_t - self.first_recv_t)

    @property
    def mean_error(self) -> float:
        return self.err_sum / self.err_count if self.err_count else 0.0


@dataclass(frozen=True)
class RunReport:
    """Outcome of one streamed session, one side."""

    role: str
    room: str
    frames_offered: int
    frames_sent: int
    frames_received: int
    bytes_received: int
    bytes_per_second: float
    mean_roundtrip_error: float
    max_roundtrip_error: float
    establish_ms: float
    proxied: str = "unknown"  # yes / no / unknown

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def to_text(self) -> str:
        lines = [f"{key} = {value}" for key, value in sorted(asdict(self).items())]
        return "\n".join(lines)


def _finish_report(role: str, room: str, stats: _StreamStats, establish_ms: float,
                   proxied: str = "unknown") -> RunReport:
    return RunReport(
        role=role,
        room=room,
        frames_offered=stats.offered,
        frames_sent=stats.sent,
        frames_received=stats.received,
        bytes_received=stats.bytes_received,
        bytes_per_second=stats.bytes_per_second,
        mean_roundtrip_error=stats.mean_error,
        max_roundtrip_error=stats.err_max,
        establish_ms=establish_ms,
        proxied=proxied,
    )


async def send_stream(
    channel: PeerChannel,
    frames: Sequence[LandmarkFrame],
    fps_cap: float,
    stats: _StreamStats,
    pose: MeshPose = IDENTITY_POSE,
) -> None:
    """Send every frame at the pace cap, flagging the last one as end of
    stream. Offers arrive exactly at the cap interval, so none are
    coalesced away."""
    frames = list(frames)
    interval = 1.0 / fps_cap if fps_cap > 0 else 0.0
    pacer = FramePacer(fps_cap)
    last_send = None
    for i, frame in enumerate(frames):
        if last_send is not None:
            await asyncio.sleep(max(0.0, last_send + interval - time.monotonic()))
        now = time.monotonic()
        flags = FLAG_END_OF_STREAM if i == len(frames) - 1 else 0
        packet = encode_frame(
            frame.points, pose, sequence=i, timestamp_ms=frame.timestamp_ms, flags=flags
        )
        pacer.offer(packet, now)
        out = pacer.poll(now)
        if out is None:
            continue
        stats.on_send(out, frame.points)
        await channel.send(CHANNEL_DATA, out)
        last_send = now
    stats.offered = pacer.offered
    stats.sent = pacer.sent


async def send_stream_unpaced(
    channel: PeerChannel,
    frame_source: Iterable[LandmarkFrame],
    fps_cap: float,
    duration_s: float,
    stats: _StreamStats,
) -> None:
    """Offer frames as fast as they come and let the pacer gate actual
    sends; used by the loopback rate bench."""
    pacer = FramePacer(fps_cap)
    start = time.monotonic()
    source = iter(frame_source)
    sequence = 0
    while True:
        frame = next(source)
        now = time.monotonic()
        closing = (now - start) >= duration_s
        flags = FLAG_END_OF_STREAM if closing else 0
        packet = encode_frame(
            frame.points, IDENTITY_POSE, sequence=sequence,
            timestamp_ms=frame.timestamp_ms, flags=flags,
        )
        pacer.offer(packet, now)
        out = pacer.poll(now)
        if closing:
            # the closing frame bypasses the pace gate so the receiver
            # always sees end of stream
            out = out if out is not None else packet
        if out is not None:
            stats.on_send(out, frame.points)
            await channel.send(CHANNEL_DATA, out)
            sequence += 1
        if closing:
            break
        await asyncio.sleep(0.0005)
    stats.offered = pacer.offered
    stats.sent = sequence


async def receive_stream(
    channel: PeerChannel,
    stats: _StreamStats,
    started: asyncio.Event | None = None,
    idle_timeout: float = 30.0,
    sink: list | None = None,
) -> None:
    """Drain data-channel packets until end of stream or the channel
    drops. Track-channel payloads are counted as bytes but not frames."""
    while True:
        try:
            cid, payload = await asyncio.wait_for(channel.receive(), idle_timeout)
        except (ChannelClosed, asyncio.TimeoutError):
            break
        if cid != CHANNEL_DATA:
            continue
        decoded = decode_frame(payload)
        stats.on_receive(len(payload), time.monotonic())
        if sink is not None:
            sink.append(decoded)
        if started is not None and not started.is_set():
            started.set()
        if decoded.end_of_stream:
            break


async def _run_stream(
    channel: PeerChannel,
    frames: Sequence[LandmarkFrame],
    fps_cap: float,
    stats: _StreamStats,
    started: asyncio.Event | None,
    sink: list | None = None,
) -> None:
    receiver = asyncio.create_task(receive_stream(channel, stats, started, sink=sink))
    try:
        await send_stream(channel, frames, fps_cap, stats)
        await receiver
    finally:
        receiver.cancel()
        await channel.close()


# ---------------------------------------------------------------------------
# the two session roles


async def owner_stream(
    ws_url: str,
    frames: Sequence[LandmarkFrame],
    *,
    fps_cap: float = DEFAULT_FPS_CAP,
    rng: random.Random | None = None,
    on_room: Callable[[str], None] | None = None,
    streaming_started: asyncio.Event | None = None,
    join_timeout: float = JOIN_TIMEOUT,
    recv_timeout: float = RECV_TIMEOUT,
    peer_host: str = "127.0.0.1",
    received_sink: list | None = None,
) -> tuple[RunReport, list[tuple[str, dict]]]:
    """Create a room, negotiate, hang up, stream. Returns the report and
    the signaling transcript."""
    client = SignalingClient(ws_url)
    stats = _StreamStats()
    listener = PeerListener(host=peer_host, rng=rng)
    channel = None
    t0 = time.monotonic()
    await client.connect()
    try:
        await client.send(protocol.msg_create_room())
        doc = await client.recv_type(protocol.ROOM_CREATED, timeout=recv_timeout)
        room = doc["room"]
        if on_room is not None:
            on_room(room)
        await client.recv_type(protocol.PEER_JOINED, timeout=join_timeout)
        await listener.start()
        offer = listener.make_offer()
        await client.send(protocol.msg_blob(protocol.OFFER, encode_offer(offer)))
        doc = await client.recv_type(protocol.ANSWER, timeout=recv_timeout)
        answer = decode_answer(protocol.body_to_blob(doc["body"]))
        channel = await listener.establish(offer, answer)
        establish_ms = (time.monotonic() - t0) * 1000.0
        await client.send(protocol.msg_established())
        await client.send(protocol.msg_hang_up())
    except BaseException:
        await listener.stop()
        if channel is not None:
            await channel.close()
        raise
    finally:
        await client.close()
    try:
        await _run_stream(channel, frames, fps_cap, stats, streaming_started, received_sink)
    finally:
        await listener.stop()
    return _finish_report("owner", room, stats, establish_ms), client.transcript


async def guest_stream(
    ws_url: str,
    room: str,
    frames: Sequence[LandmarkFrame],
    *,
    fps_cap: float = DEFAULT_FPS_CAP,
    streaming_started: asyncio.Event | None = None,
    recv_timeout: float = RECV_TIMEOUT,
    received_sink: list | None = None,
) -> tuple[RunReport, list[tuple[str, dict]]]:
    """Join an existing room, negotiate, hang up, stream."""
    client = SignalingClient(ws_url)
    stats = _StreamStats()
    channel = None
    t0 = time.monotonic()
    await client.connect()
    try:
        await client.send(protocol.msg_join_room(room))
        await client.recv_type(protocol.PEER_JOINED, timeout=recv_timeout)
        doc = await client.recv_type(protocol.OFFER, timeout=recv_timeout)
        offer = decode_offer(protocol.body_to_blob(doc["body"]))
        extra: list[str] = []
        while True:
            try:
                answer, channel = await accept_offer(offer, tuple(extra))
                break
            except AllCandidatesFailed:
                # wait for a trickled candidate and retry with it
                try:
                    cdoc = await client.recv_type(protocol.ICE_CANDIDATE, timeout=2.0)
                except asyncio.TimeoutError:
                    raise AllCandidatesFailed("no candidate connected and none trickled in")
                trickled = decode_negotiation(protocol.body_to_blob(cdoc["body"]))
                extra.extend(trickled["endpoints"])
        await client.send(protocol.msg_blob(protocol.ANSWER, encode_answer(answer)))
        await client.recv_type(protocol.ESTABLISHED, timeout=recv_timeout)
        establish_ms = (time.monotonic() - t0) * 1000.0
        await client.send(protocol.msg_hang_up())
    except BaseException:
        if channel is not None:
            await channel.close()
        raise
    finally:
        await client.close()
    await _run_stream(channel, frames, fps_cap, stats, streaming_started, received_sink)
    return _finish_report("guest", room, stats, establish_ms), client.transcript


# ---------------------------------------------------------------------------
# paired orchestration


@dataclass(frozen=True)
class PairResult:
    owner: RunReport
    guest: RunReport
    owner_transcript: list
    guest_transcript: list
    room: str


async def run_pair(
    ws_url: str,
    owner_frames: Sequence[LandmarkFrame],
    guest_frames: Sequence[LandmarkFrame],
    *,
    fps_cap: float = DEFAULT_FPS_CAP,
    seed: int | None = None,
    guest_ws_url: str | None = None,
    mid_stream: Callable[[], Awaitable[None]] | None = None,
    proxies_probe: Callable[[], Awaitable[int]] | None = None,
) -> PairResult:
    """Run an owner and a guest against the same signaling service and
    stream both directions to completion.

    mid_stream, when given, is awaited once both sides have received
    their first frame; it may tear down infrastructure the stream must
    survive. proxies_probe reports the cumulative count of proxy links
    opened, before and after, to tell whether this pair was proxied."""
    rng = random.Random(seed) if seed is not None else None
    loop = asyncio.get_running_loop()
    room_future: asyncio.Future = loop.create_future()
    owner_started = asyncio.Event()
    guest_started = asyncio.Event()
    before = await proxies_probe() if proxies_probe is not None else None

    async def owner_side():
        def announce(room_id: str) -> None:
            if not room_future.done():
                room_future.set_result(room_id)

        try:
            return await owner_stream(
                ws_url, owner_frames, fps_cap=fps_cap, rng=rng,
                on_room=announce, streaming_started=owner_started,
                join_timeout=10.0,
            )
        except BaseException as exc:
            if not room_future.done():
                room_future.set_exception(exc)
                raise asyncio.CancelledError from exc
            raise

    async def guest_side():
        room = await asyncio.wait_for(asyncio.shield(room_future), 10.0)
        return await guest_stream(
            guest_ws_url or ws_url, room, guest_frames,
            fps_cap=fps_cap, streaming_started=guest_started,
        )

    async def saboteur():
        if mid_stream is None:
            return None
        await owner_started.wait()
        await guest_started.wait()
        await mid_stream()
        return None

    owner_task = asyncio.create_task(owner_side())
    guest_task = asyncio.create_task(guest_side())
    extra_task = asyncio.create_task(saboteur())
    try:
        (owner_report, owner_tr), (guest_report, guest_tr), _ = await asyncio.gather(
            owner_task, guest_task, extra_task
        )
    except BaseException:
        for task in (owner_task, guest_task, extra_task):
            task.cancel()
        await asyncio.gather(owner_task, guest_task, extra_task, return_exceptions=True)
        raise

    proxied = "unknown"
    if proxies_probe is not None:
        after = await proxies_probe()
        proxied = "yes" if after > before else "no"
    owner_report = dataclasses.replace(owner_report, proxied=proxied)
    guest_report = dataclasses.replace(guest_report, proxied=proxied)
    return PairResult(owner_report, guest_report, owner_tr, guest_tr, owner_report.room)


async def fetch_healthz(url: str, timeout: float = 3.0) -> dict:
    """GET an instance health document (plain HTTP, run in a thread)."""

    def _get() -> dict:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    return await asyncio.to_thread(_get)


def proxies_probe_for(healthz_urls: Sequence[str]) -> Callable[[], Awaitable[int]]:
    """Probe summing cumulative outbound proxy links across instances."""

    async def probe() -> int:
        total = 0
        for url in healthz_urls:
            doc = await fetch_healthz(url)
            total += int(doc.get("proxies_out", 0))
        return total

    return probe


# ---------------------------------------------------------------------------
# loopback bench


@dataclass(frozen=True)
class BenchResult:
    seconds: float
    frames_offered: int
    frames_sent: int
    frames_received: int
    bytes_received: int
    bytes_per_second: float
    budget_bytes_per_second: float

    def to_text(self) -> str:
        lines = [f"{key} = {value}" for key, value in sorted(asdict(self).items())]
        return "\n".join(lines)


async def loopback_bench(
    frame_source: Iterable[LandmarkFrame],
    *,
    fps_cap: float = DEFAULT_FPS_CAP,
    duration_s: float = 10.0,
) -> BenchResult:
    """Two peers on localhost, one direction, offered frames unlimited,
    sends gated by the pacer. Measures the received byte rate."""
    listener = await PeerListener().start()
    offer = listener.make_offer()
    answer, guest_channel = await accept_offer(offer)
    owner_channel = await listener.establish(offer, answer)
    send_stats = _StreamStats()
    recv_stats = _StreamStats()
    start = time.monotonic()
    try:
        receiver = asyncio.create_task(receive_stream(guest_channel, recv_stats))
        await send_stream_unpaced(owner_channel, frame_source, fps_cap, duration_s, send_stats)
        await receiver
    finally:
        await owner_channel.close()
        await guest_channel.close()
        await listener.stop()
    elapsed = time.monotonic() - start
    return BenchResult(
        seconds=elapsed,
        frames_offered=send_stats.offered,
        frames_sent=send_stats.sent,
        frames_received=recv_stats.received,
        bytes_received=recv_stats.bytes_received,
        bytes_per_second=recv_stats.bytes_per_second,
        budget_bytes_per_second=budget(fps_cap).bytes_per_second,
    )
