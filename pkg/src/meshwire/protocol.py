"""Signaling wire protocol: tagged JSON documents.

Every message is one JSON object with a "type" tag, an optional "room",
and an optional "body". Negotiation bodies (offer/answer/ice candidate)
are base64 strings the service relays without parsing. The same
documents travel as WebSocket text frames at the client boundary and as
4-byte length-prefixed frames on inter-instance proxy links, where an
extra "proxy_room" field scopes them to a room.
"""

from __future__ import annotations

import asyncio
import base64
import json

# message type tags
CREATE_ROOM = "create_room"
ROOM_CREATED = "room_created"
JOIN_ROOM = "join_room"
PEER_JOINED = "peer_joined"
OFFER = "offer"
ANSWER = "answer"
ICE_CANDIDATE = "ice_candidate"
RELAY_FRAME = "relay_frame"
ESTABLISHED = "established"
HANG_UP = "hang_up"
ERROR = "error"

ALL_TYPES = frozenset(
    {
        CREATE_ROOM,
        ROOM_CREATED,
        JOIN_ROOM,
        PEER_JOINED,
        OFFER,
        ANSWER,
        ICE_CANDIDATE,
        RELAY_FRAME,
        ESTABLISHED,
        HANG_UP,
        ERROR,
    }
)

# message kinds the room machine relays verbatim to the other party
RELAYED_TYPES = frozenset({OFFER, ANSWER, ICE_CANDIDATE, RELAY_FRAME})

# error codes
ERR_ROOM_NOT_FOUND = 1
ERR_ROOM_FULL = 2
ERR_ILLEGAL_STATE = 3
ERR_NO_PEER = 4
ERR_PEER_GONE = 5

ERROR_NAMES = {
    ERR_ROOM_NOT_FOUND: "room not found",
    ERR_ROOM_FULL: "room full",
    ERR_ILLEGAL_STATE: "illegal state",
    ERR_NO_PEER: "no peer",
    ERR_PEER_GONE: "peer gone",
}

RELAY_FRAME_LIMIT = 4096  # decoded payload bytes
MAX_DOC_BYTES = 1 << 20

PROXY_ROOM_FIELD = "proxy_room"


class ProtocolError(ValueError):
    pass


def encode_doc(doc: dict) -> str:
    """Canonical JSON text: sorted keys, no whitespace, so identical
    documents serialize to identical bytes everywhere."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def decode_doc(text) -> dict:
    try:
        if isinstance(text, (bytes, bytearray)):
            text = bytes(text).decode("utf-8", errors="strict")
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"unparseable document: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("type"), str):
        raise ProtocolError("document must be an object with a string 'type'")
    return doc


def blob_to_body(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def body_to_blob(body: str) -> bytes:
    try:
        return base64.b64decode(body.encode("ascii"), validate=True)
    except Exception as exc:
        raise ProtocolError(f"bad base64 body: {exc}") from exc


def msg_create_room() -> dict:
    return {"type": CREATE_ROOM}


def msg_room_created(room_id: str) -> dict:
    return {"type": ROOM_CREATED, "room": room_id}


def msg_join_room(room_id: str) -> dict:
    return {"type": JOIN_ROOM, "room": room_id}


def msg_peer_joined(room_id: str) -> dict:
    return {"type": PEER_JOINED, "room": room_id}


def msg_blob(tag: str, blob: bytes) -> dict:
    return {"type": tag, "body": blob_to_body(blob)}


def msg_established() -> dict:
    return {"type": ESTABLISHED}


def msg_hang_up() -> dict:
    return {"type": HANG_UP}


def msg_error(code: int, text: str = "") -> dict:
    return {"type": ERROR, "code": code, "text": text or ERROR_NAMES.get(code, "")}


# ---------------------------------------------------------------------------
# length-prefixed framing for stream transports (inter-instance proxy)


async def read_framed(reader: asyncio.StreamReader) -> dict | None:
    """Read one framed document; None on clean end of stream."""
    try:
        header = await reader.readexactly(4)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    length = int.from_bytes(header, "big")
    if length > MAX_DOC_BYTES:
        raise ProtocolError(f"framed document of {length} bytes exceeds limit")
    try:
        payload = await reader.readexactly(length)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    return decode_doc(payload)


async def write_framed(writer: asyncio.StreamWriter, doc: dict) -> None:
    payload = encode_doc(doc).encode("utf-8")
    if len(payload) > MAX_DOC_BYTES:
        raise ProtocolError("document too large to frame")
    writer.write(len(payload).to_bytes(4, "big") + payload)
    await writer.drain()
