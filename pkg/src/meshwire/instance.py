"""One signaling instance: WebSocket endpoint for clients, health
endpoint for probes, and a TCP listener accepting proxy links from
sibling instances.

Rooms live on the instance where they were created; the shared
directory maps room ids to the owning instance's advertised proxy
address. A guest landing elsewhere is piped over a per-room proxy link,
with both WebSocket legs seeing exactly the local protocol: proxying is
invisible at the client boundary.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import os
import random
import time

from websockets.asyncio.server import serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from . import directory as dirmod
from . import protocol
from .directory import DirectoryStore, RoomRecord
from .protocol import (
    PROXY_ROOM_FIELD,
    ERR_ILLEGAL_STATE,
    ERR_PEER_GONE,
    ERR_ROOM_NOT_FOUND,
    ProtocolError,
    decode_doc,
    encode_doc,
    msg_error,
    read_framed,
    write_framed,
)
from .rooms import Role, RoomMachine, RoomPhase, StepResult, TO_GUEST, TO_JOINER, TO_OWNER

log = logging.getLogger("meshwire.instance")

ROOM_ID_MAX = 999_999
ID_DRAW_LIMIT = 64
LINK_QUEUE_LIMIT = 1024

_MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json",
    ".txt": "text/plain; charset=utf-8",
    ".tris": "text/plain; charset=utf-8",
    ".rec": "text/plain; charset=utf-8",
    ".map": "application/json",
}


class IdExhaustion(Exception):
    """No unique room id found within the draw limit."""


def _http_response(status: int, payload: bytes, content_type: str) -> Response:
    reasons = {200: "OK", 404: "Not Found"}
    headers = Headers(
        [
            ("Content-Type", content_type),
            ("Content-Length", str(len(payload))),
            ("Connection", "close"),
        ]
    )
    return Response(status, reasons.get(status, ""), headers, payload)


class _Link:
    """Ordered, bounded outbound queue in front of one transport leg."""

    def __init__(self):
        self._queue: asyncio.Queue = asyncio.Queue(LINK_QUEUE_LIMIT)
        self._lock = asyncio.Lock()
        self.closed = False
        self._task = asyncio.create_task(self._pump())

    async def send(self, doc: dict) -> None:
        if self.closed:
            return
        async with self._lock:
            await self._queue.put(doc)

    async def _pump(self) -> None:
        while True:
            doc = await self._queue.get()
            if doc is None:
                break
            try:
                await self._write(doc)
            except Exception:
                break
        self.closed = True
        await self._shutdown()

    async def _write(self, doc: dict) -> None:
        raise NotImplementedError

    async def _shutdown(self) -> None:
        pass

    async def close(self) -> None:
        """Flush queued documents, then close the transport."""
        if not self.closed:
            self.closed = True
            await self._queue.put(None)
        try:
            await asyncio.wait_for(self._task, timeout=5.0)
        except (asyncio.TimeoutError, asyncio.CancelledError):
            self._task.cancel()

    def abort(self) -> None:
        self.closed = True
        self._task.cancel()


class _WsLink(_Link):
    def __init__(self, conn):
        self.conn = conn
        super().__init__()

    async def _write(self, doc: dict) -> None:
        await self.conn.send(encode_doc(doc))


class _ProxyGuestLink(_Link):
    """Owner-instance view of a proxied guest: documents ride the proxy
    TCP stream stamped with the room id."""

    def __init__(self, writer: asyncio.StreamWriter, room_id: str):
        self.writer = writer
        self.room_id = room_id
        super().__init__()

    async def _write(self, doc: dict) -> None:
        stamped = dict(doc)
        stamped[PROXY_ROOM_FIELD] = self.room_id
        await write_framed(self.writer, stamped)

    async def _shutdown(self) -> None:
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class _Room:
    def __init__(self, machine: RoomMachine):
        self.machine = machine
        self.links: dict[Role, _Link | None] = {Role.OWNER: None, Role.GUEST: None}


class _ClientConn:
    """Per-WebSocket connection state."""

    def __init__(self, link: _WsLink):
        self.link = link
        self.room_id: str | None = None
        self.role: Role | None = None
        self.pipe: "_ProxyPipe | None" = None

    @property
    def bound(self) -> bool:
        return self.room_id is not None or self.pipe is not None


class _ProxyPipe:
    """Guest-instance side of a proxy link: pipes one guest WebSocket to
    the owning instance over a framed TCP stream."""

    def __init__(self, instance: "SignalInstance", conn: _ClientConn, room_id: str,
                 reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.instance = instance
        self.conn = conn
        self.room_id = room_id
        self.reader = reader
        self.writer = writer
        self.closed = False
        self._task = asyncio.create_task(self._pump_inbound())

    async def forward(self, doc: dict) -> None:
        """Guest -> owner instance."""
        if self.closed:
            return
        stamped = dict(doc)
        stamped[PROXY_ROOM_FIELD] = self.room_id
        try:
            await write_framed(self.writer, stamped)
        except (ConnectionError, OSError):
            await self._on_broken()

    async def _pump_inbound(self) -> None:
        """Owner instance -> guest."""
        try:
            while True:
                doc = await read_framed(self.reader)
                if doc is None:
                    break
                doc.pop(PROXY_ROOM_FIELD, None)
                await self.conn.link.send(doc)
        except (ProtocolError, ConnectionError, OSError):
            pass
        await self._on_broken()

    async def _on_broken(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.writer.close()
        except (ConnectionError, OSError):
            pass
        # the room died with the link; release the guest connection
        if self.conn.pipe is self:
            self.conn.pipe = None

    async def close(self, send_hang_up: bool) -> None:
        if self.closed:
            return
        if send_hang_up:
            await self.forward(protocol.msg_hang_up())
        self.closed = True
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass
        self._task.cancel()

    def abort(self) -> None:
        self.closed = True
        try:
            self.writer.close()
        except (ConnectionError, OSError):
            pass
        self._task.cancel()


class SignalInstance:
    """A single signaling service instance."""

    def __init__(
        self,
        store: DirectoryStore,
        *,
        host: str = "127.0.0.1",
        port: int = 0,
        proxy_port: int = 0,
        instance_id: str = "i0",
        seed: int | None = None,
        room_ttl: float = 600.0,
        web_root: str | None = None,
    ):
        self.store = store
        self.host = host
        self.instance_id = instance_id
        self.room_ttl = room_ttl
        self.web_root = web_root
        self.rooms: dict[str, _Room] = {}
        self.proxies_out = 0
        self.proxies_in = 0
        self._requested_port = port
        self._requested_proxy_port = proxy_port
        self._rng = random.Random(seed)
        self._server = None
        self._proxy_server = None
        self._reaper: asyncio.Task | None = None
        self._conn_tasks: set[asyncio.Task] = set()
        self._proxy_guest_links: set[_ProxyGuestLink] = set()
        self._pipes: set[_ProxyPipe] = set()
        self.port = None
        self.proxy_port = None

    # -- lifecycle ----------------------------------------------------------

    async def start(self) -> "SignalInstance":
        self._server = await serve(
            self._handle_ws,
            self.host,
            self._requested_port,
            process_request=self._process_request,
        )
        self.port = self._server.sockets[0].getsockname()[1]
        self._proxy_server = await asyncio.start_server(
            self._handle_proxy_conn, self.host, self._requested_proxy_port
        )
        self.proxy_port = self._proxy_server.sockets[0].getsockname()[1]
        self._reaper = asyncio.create_task(self._reap_loop())
        log.info("instance %s on ws=%s proxy=%s", self.instance_id, self.port, self.proxy_port)
        return self

    @property
    def advertise(self) -> str:
        return f"{self.host}:{self.proxy_port}"

    @property
    def ws_url(self) -> str:
        return f"ws://{self.host}:{self.port}/ws"

    async def stop(self) -> None:
        """Hard stop: drop every connection and task."""
        if self._reaper:
            self._reaper.cancel()
        if self._server:
            self._server.close(close_connections=True)
        if self._proxy_server:
            self._proxy_server.close()
        for pipe in list(self._pipes):
            pipe.abort()
        for link in list(self._proxy_guest_links):
            link.abort()
        for room in self.rooms.values():
            for link in room.links.values():
                if link is not None:
                    link.abort()
        for task in list(self._conn_tasks):
            task.cancel()
        if self._server:
            await self._server.wait_closed()
        if self._proxy_server:
            try:
                await self._proxy_server.wait_closed()
            except Exception:
                pass
        await asyncio.gather(*self._conn_tasks, return_exceptions=True)
        self.rooms.clear()

    # -- plain HTTP ----------------------------------------------------------

    def _process_request(self, conn, request):
        path = request.path.split("?", 1)[0]
        if path == "/ws":
            return None
        if path == "/healthz":
            body = json.dumps(
                {
                    "instance": self.instance_id,
                    "rooms": len(self.rooms),
                    "proxies_out": self.proxies_out,
                    "proxies_in": self.proxies_in,
                }
            )
            return _http_response(200, (body + "\n").encode("utf-8"), "application/json")
        if self.web_root is not None:
            return self._serve_static(path)
        return _http_response(404, b"not found\n", "text/plain; charset=utf-8")

    def _serve_static(self, path: str):
        name = path.lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(self.web_root, name))
        root = os.path.abspath(self.web_root)
        if not os.path.abspath(full).startswith(root + os.sep) and os.path.abspath(full) != root:
            return _http_response(404, b"not found\n", "text/plain; charset=utf-8")
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            return _http_response(404, b"not found\n", "text/plain; charset=utf-8")
        with open(full, "rb") as fh:
            data = fh.read()
        ext = os.path.splitext(full)[1].lower()
        return _http_response(200, data, _MIME.get(ext, "application/octet-stream"))

    # -- websocket client handling -------------------------------------------

    async def _handle_ws(self, conn) -> None:
        task = asyncio.current_task()
        self._conn_tasks.add(task)
        client = _ClientConn(_WsLink(conn))
        try:
            async for raw in conn:
                try:
                    doc = decode_doc(raw)
                except ProtocolError as exc:
                    await client.link.send(msg_error(ERR_ILLEGAL_STATE, str(exc)))
                    continue
                await self._dispatch(client, doc)
        except Exception:
            pass
        finally:
            self._conn_tasks.discard(task)
            await self._client_gone(client)
            client.link.abort()

    async def _dispatch(self, client: _ClientConn, doc: dict) -> None:
        mtype = doc.get("type")
        if client.pipe is not None:
            # guest of a remote room: everything rides the proxy link
            await client.pipe.forward(doc)
            if mtype == protocol.HANG_UP:
                pipe, client.pipe = client.pipe, None
                await pipe.close(send_hang_up=False)
            return
        if mtype == protocol.CREATE_ROOM:
            await self._handle_create(client)
        elif mtype == protocol.JOIN_ROOM:
            await self._handle_join(client, doc)
        elif mtype == protocol.HANG_UP:
            if client.room_id is not None:
                await self._room_event(client.room_id, "detach", client.role)
                client.room_id = None
                client.role = None
            # hanging up outside a room is a harmless no-op
        elif client.room_id is not None:
            await self._room_event(client.room_id, "message", client.role, doc)
        else:
            await client.link.send(msg_error(ERR_ILLEGAL_STATE, f"{mtype} outside a room"))

    async def _client_gone(self, client: _ClientConn) -> None:
        if client.pipe is not None:
            pipe, client.pipe = client.pipe, None
            await pipe.close(send_hang_up=True)
        elif client.room_id is not None:
            await self._room_event(client.room_id, "detach", client.role)
            client.room_id = None

    async def _handle_create(self, client: _ClientConn) -> None:
        if client.bound:
            await client.link.send(msg_error(ERR_ILLEGAL_STATE, "already in a room"))
            return
        try:
            room_id = self._register_fresh_room()
        except IdExhaustion:
            await client.link.send(msg_error(ERR_ILLEGAL_STATE, "room id space exhausted"))
            return
        room = _Room(RoomMachine(room_id))
        room.links[Role.OWNER] = client.link
        self.rooms[room_id] = room
        client.room_id = room_id
        client.role = Role.OWNER
        result = room.machine.attach_owner()
        await self._apply(room, result)

    def _register_fresh_room(self) -> str:
        for _ in range(ID_DRAW_LIMIT):
            candidate = str(self._rng.randint(0, ROOM_ID_MAX))
            record = dirmod.fresh_record(candidate, self.advertise, RoomPhase.OWNER_WAITING.value)
            try:
                dirmod.register_room(self.store, record)
            except dirmod.Duplicate:
                continue
            return candidate
        raise IdExhaustion(f"no free room id after {ID_DRAW_LIMIT} draws")

    async def _handle_join(self, client: _ClientConn, doc: dict) -> None:
        if client.bound:
            await client.link.send(msg_error(ERR_ILLEGAL_STATE, "already in a room"))
            return
        room_id = str(doc.get("room", ""))
        room = self.rooms.get(room_id)
        if room is not None:
            result = room.machine.guest_join()
            if result.admitted_guest:
                room.links[Role.GUEST] = client.link
                client.room_id = room_id
                client.role = Role.GUEST
            await self._apply(room, result, joiner=client.link)
            return
        # not local: consult the directory
        try:
            remote = dirmod.lookup_room(self.store, room_id)
        except dirmod.NotFound:
            await client.link.send(msg_error(ERR_ROOM_NOT_FOUND))
            return
        if remote == self.advertise:
            # stale record for a room this instance no longer has
            await client.link.send(msg_error(ERR_ROOM_NOT_FOUND))
            return
        await self._join_via_proxy(client, room_id, remote)

    async def _join_via_proxy(self, client: _ClientConn, room_id: str, remote: str) -> None:
        host, _, port = remote.rpartition(":")
        try:
            reader, writer = await asyncio.open_connection(host, int(port))
        except (ConnectionError, OSError):
            # remote instance unreachable: the peer is effectively gone
            await client.link.send(msg_error(ERR_PEER_GONE, "owner instance unreachable"))
            return
        self.proxies_out += 1
        pipe = _ProxyPipe(self, client, room_id, reader, writer)
        self._pipes.add(pipe)
        client.pipe = pipe
        await pipe.forward(protocol.msg_join_room(room_id))

    # -- proxy server side (owner instance) -----------------------------------

    async def _handle_proxy_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        self._conn_tasks.add(task)
        self.proxies_in += 1
        guest_link: _ProxyGuestLink | None = None
        room_id: str | None = None
        try:
            while True:
                doc = await read_framed(reader)
                if doc is None:
                    break
                scoped = doc.pop(PROXY_ROOM_FIELD, None)
                if scoped is None:
                    continue  # not a proxied document; ignore
                if room_id is None:
                    room_id = str(scoped)
                    guest_link = _ProxyGuestLink(writer, room_id)
                    self._proxy_guest_links.add(guest_link)
                if doc.get("type") == protocol.JOIN_ROOM:
                    room = self.rooms.get(room_id)
                    if room is None:
                        await guest_link.send(msg_error(ERR_ROOM_NOT_FOUND))
                        break
                    result = room.machine.guest_join()
                    if result.admitted_guest:
                        room.links[Role.GUEST] = guest_link
                    await self._apply(room, result, joiner=guest_link)
                    if not result.admitted_guest:
                        break
                elif doc.get("type") == protocol.HANG_UP:
                    await self._room_event(room_id, "detach", Role.GUEST)
                    break
                else:
                    await self._room_event(room_id, "message", Role.GUEST, doc)
        except (ProtocolError, ConnectionError, OSError):
            pass
        finally:
            self._conn_tasks.discard(task)
            # transport loss without hang_up still detaches the guest
            if room_id is not None:
                room = self.rooms.get(room_id)
                if room is not None and room.links.get(Role.GUEST) is guest_link:
                    await self._room_event(room_id, "detach", Role.GUEST)
            if guest_link is not None:
                await guest_link.close()
                self._proxy_guest_links.discard(guest_link)
            else:
                try:
                    writer.close()
                except (ConnectionError, OSError):
                    pass

    # -- room event plumbing ---------------------------------------------------

    async def _room_event(self, room_id: str, kind: str, role: Role | None, doc: dict | None = None) -> None:
        room = self.rooms.get(room_id)
        if room is None or role is None:
            return
        before = room.machine.phase
        if kind == "detach":
            result = room.machine.detach(role)
        else:
            result = room.machine.message(role, doc)
        await self._apply(room, result, before=before)

    async def _apply(self, room: _Room, result: StepResult,
                     joiner: _Link | None = None, before: RoomPhase | None = None) -> None:
        machine = room.machine
        for target, doc in result.emits:
            if target == TO_JOINER:
                link = joiner
            elif target == TO_OWNER:
                link = room.links[Role.OWNER]
            elif target == TO_GUEST:
                link = room.links[Role.GUEST]
            else:
                link = None
            if link is not None:
                await link.send(doc)
        if result.closed:
            await self._finalize_room(machine.room_id, room)
        elif before is not None and machine.phase is not before:
            self._update_record(machine.room_id, machine.phase)
        elif result.admitted_guest:
            self._update_record(machine.room_id, machine.phase)

    def _update_record(self, room_id: str, phase: RoomPhase) -> None:
        record = self.store.get(room_id)
        if record is not None:
            self.store.put(room_id, dataclasses.replace(record, state=phase.value))

    async def _finalize_room(self, room_id: str, room: _Room) -> None:
        self.rooms.pop(room_id, None)
        self.store.delete(room_id)
        guest_link = room.links.get(Role.GUEST)
        if isinstance(guest_link, _ProxyGuestLink):
            await guest_link.close()
            self._proxy_guest_links.discard(guest_link)

    # -- reaping -----------------------------------------------------------------

    async def _reap_loop(self) -> None:
        interval = max(0.05, min(self.room_ttl / 4.0, 5.0))
        while True:
            await asyncio.sleep(interval)
            now = time.time()
            for room_id in list(self.rooms):
                room = self.rooms.get(room_id)
                if room is None or room.machine.phase is not RoomPhase.OWNER_WAITING:
                    continue
                record = self.store.get(room_id)
                created = record.created_at if record else now
                if now - created >= self.room_ttl:
                    result = room.machine.expire()
                    await self._apply(room, result)
