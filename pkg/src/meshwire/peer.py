"""Peer-to-peer channel standing in for WebRTC.

Negotiation keeps WebRTC's shape: the offerer lists candidate endpoints
with a fresh session token, the answerer dials candidates in order and
echoes the token, extra candidates can trickle in afterwards. The
transport is a reliable stream carrying two logical channels:

    data (0):  mesh frame packets, exactly 2838 bytes each
    track (1): opaque payloads (stand-in for audio)

Wire framing per message: 4-byte big-endian length of (channel id +
payload), 1-byte channel id, payload. Handshake: 16-byte token + 1-byte
protocol version from the dialer, 1-byte accept flag back.
"""

from __future__ import annotations

import asyncio
import json
import random
import time
from dataclasses import dataclass

from .codec import FRAME_SIZE

CHANNEL_DATA = 0
CHANNEL_TRACK = 1

PROTOCOL_VERSION = 1  # direct peer transport
RELAY_PROTOCOL_VERSION = 2  # thin clients streaming via the signaling path

MAX_MESSAGE = 65536
ESTABLISH_TIMEOUT = 10.0
DIAL_TIMEOUT = 2.0


class PeerError(Exception):
    pass


class NoUsableEndpoint(PeerError):
    pass


class AllCandidatesFailed(PeerError):
    pass


class VersionMismatch(PeerError):
    pass


class TokenMismatch(PeerError):
    pass


class EstablishTimeout(PeerError):
    pass


class ChannelClosed(PeerError):
    pass


class OversizedMessage(PeerError):
    pass


class WrongPacketSize(OversizedMessage):
    """Data-channel messages must be exactly one packet."""


@dataclass(frozen=True)
class PeerOffer:
    session_token: bytes
    endpoints: tuple[str, ...]
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class PeerAnswer:
    session_token: bytes
    endpoints: tuple[str, ...]
    protocol_version: int = PROTOCOL_VERSION


def encode_negotiation(kind: str, token: bytes, endpoints, version: int) -> bytes:
    """Serialize an offer/answer/candidate to an opaque blob for the
    signaling path."""
    return json.dumps(
        {"kind": kind, "token": token.hex(), "endpoints": list(endpoints), "version": version},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("ascii")


def decode_negotiation(blob: bytes) -> dict:
    doc = json.loads(blob.decode("ascii"))
    doc["token"] = bytes.fromhex(doc["token"])
    return doc


def encode_offer(offer: PeerOffer) -> bytes:
    return encode_negotiation("offer", offer.session_token, offer.endpoints, offer.protocol_version)


def decode_offer(blob: bytes) -> PeerOffer:
    doc = decode_negotiation(blob)
    return PeerOffer(doc["token"], tuple(doc["endpoints"]), int(doc["version"]))


def encode_answer(answer: PeerAnswer) -> bytes:
    return encode_negotiation("answer", answer.session_token, answer.endpoints, answer.protocol_version)


def decode_answer(blob: bytes) -> PeerAnswer:
    doc = decode_negotiation(blob)
    return PeerAnswer(doc["token"], tuple(doc["endpoints"]), int(doc["version"]))


def encode_candidate(token: bytes, endpoint: str, version: int = PROTOCOL_VERSION) -> bytes:
    return encode_negotiation("candidate", token, [endpoint], version)


class PeerChannel:
    """One established peer connection carrying both logical channels."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._reader = reader
        self._writer = writer
        self._send_lock = asyncio.Lock()
        self.established_at = time.monotonic()
        self.closed = False

    async def send(self, channel_id: int, payload: bytes) -> None:
        if channel_id not in (CHANNEL_DATA, CHANNEL_TRACK):
            raise PeerError(f"unknown channel {channel_id}")
        if len(payload) > MAX_MESSAGE:
            raise OversizedMessage(f"{len(payload)} bytes exceeds {MAX_MESSAGE}")
        if channel_id == CHANNEL_DATA and len(payload) != FRAME_SIZE:
            raise WrongPacketSize(f"data channel takes {FRAME_SIZE}-byte packets, got {len(payload)}")
        frame = (1 + len(payload)).to_bytes(4, "big") + bytes([channel_id]) + payload
        async with self._send_lock:
            if self.closed:
                raise ChannelClosed("channel is closed")
            try:
                self._writer.write(frame)
                await self._writer.drain()
            except (ConnectionError, OSError) as exc:
                self.closed = True
                raise ChannelClosed(str(exc)) from exc

    async def receive(self) -> tuple[int, bytes]:
        try:
            header = await self._reader.readexactly(4)
            length = int.from_bytes(header, "big")
            if not 1 <= length <= MAX_MESSAGE + 1:
                raise ChannelClosed(f"corrupt frame length {length}")
            body = await self._reader.readexactly(length)
        except (asyncio.IncompleteReadError, ConnectionError, OSError) as exc:
            self.closed = True
            raise ChannelClosed(str(exc)) from exc
        return body[0], body[1:]

    async def close(self) -> None:
        self.closed = True
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class PeerListener:
    """Offerer-side endpoint: accepts the answerer's dial-back."""

    def __init__(self, host: str = "127.0.0.1", rng: random.Random | None = None):
        self.host = host
        self.port = None
        self._rng = rng or random.Random()
        self._server = None
        self._pending: dict[bytes, asyncio.Future] = {}

    async def start(self, port: int = 0) -> "PeerListener":
        self._server = await asyncio.start_server(self._handle, self.host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def stop(self) -> None:
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        for fut in self._pending.values():
            if not fut.done():
                fut.cancel()

    def make_offer(self, extra_endpoints: tuple[str, ...] = ()) -> PeerOffer:
        if self.port is None:
            raise NoUsableEndpoint("listener not started")
        token = self._rng.randbytes(16)
        fut = asyncio.get_running_loop().create_future()
        self._pending[token] = fut
        return PeerOffer(token, (f"{self.host}:{self.port}",) + tuple(extra_endpoints))

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            hello = await asyncio.wait_for(reader.readexactly(17), timeout=DIAL_TIMEOUT)
        except (asyncio.TimeoutError, asyncio.IncompleteReadError, ConnectionError):
            writer.close()
            return
        token, version = hello[:16], hello[16]
        fut = self._pending.get(token)
        if fut is None or fut.done() or version != PROTOCOL_VERSION:
            # unknown token or stale offer: reject the dial
            try:
                writer.write(b"\x00")
                await writer.drain()
            except (ConnectionError, OSError):
                pass
            writer.close()
            return
        writer.write(b"\x01")
        await writer.drain()
        fut.set_result(PeerChannel(reader, writer))

    async def establish(self, offer: PeerOffer, answer: PeerAnswer,
                        timeout: float = ESTABLISH_TIMEOUT) -> PeerChannel:
        """Offerer side: check the answer and wait for the dial-back."""
        if answer.session_token != offer.session_token:
            raise TokenMismatch("answer does not echo the offer token")
        fut = self._pending.get(offer.session_token)
        if fut is None:
            raise TokenMismatch("unknown offer")
        try:
            return await asyncio.wait_for(asyncio.shield(fut), timeout)
        except asyncio.TimeoutError as exc:
            raise EstablishTimeout(f"no dial-back within {timeout}s") from exc
        finally:
            if fut.done():
                self._pending.pop(offer.session_token, None)


async def accept_offer(
    offer: PeerOffer,
    extra_endpoints: tuple[str, ...] = (),
    dial_timeout: float = DIAL_TIMEOUT,
) -> tuple[PeerAnswer, PeerChannel]:
    """Answerer side: dial candidates in order; first success wins."""
    if offer.protocol_version != PROTOCOL_VERSION:
        raise VersionMismatch(
            f"offer speaks version {offer.protocol_version}, this peer speaks {PROTOCOL_VERSION}"
        )
    candidates = tuple(offer.endpoints) + tuple(extra_endpoints)
    last_error: Exception | None = None
    for endpoint in candidates:
        host, _, port = endpoint.rpartition(":")
        try:
            reader, writer = await asyncio.wait_for(
                asyncio.open_connection(host, int(port)), timeout=dial_timeout
            )
            writer.write(offer.session_token + bytes([PROTOCOL_VERSION]))
            await writer.drain()
            flag = await asyncio.wait_for(reader.readexactly(1), timeout=dial_timeout)
            if flag != b"\x01":
                writer.close()
                last_error = PeerError(f"{endpoint} rejected the handshake")
                continue
        except (asyncio.TimeoutError, asyncio.IncompleteReadError, ConnectionError, OSError, ValueError) as exc:
            last_error = exc
            continue
        answer = PeerAnswer(offer.session_token, (endpoint,))
        return answer, PeerChannel(reader, writer)
    raise AllCandidatesFailed(f"no candidate accepted the dial: {last_error}")
