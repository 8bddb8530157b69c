"""Multi-instance harness: n signaling instances sharing one directory
store behind a round-robin TCP dispatcher that stands in for a load
balancer. Placement is deterministic: the i-th accepted connection goes
to instance i mod n, so tests can force owner and guest onto different
instances.
"""

from __future__ import annotations

import asyncio
import logging

from .directory import DirectoryStore, make_store
from .instance import SignalInstance

log = logging.getLogger("meshwire.cluster")


class PortUnavailable(OSError):
    pass


class Dispatcher:
    """L4 round-robin front door. Connections are piped byte-for-byte to
    a backend; a refused backend is skipped (dead-instance recovery for
    new sessions)."""

    def __init__(self, backends: list[tuple[str, int]], host: str = "127.0.0.1", port: int = 0):
        self.backends = list(backends)
        self.host = host
        self._requested_port = port
        self._counter = 0
        self._server = None
        self._tasks: set[asyncio.Task] = set()
        self.port = None

    async def start(self) -> "Dispatcher":
        try:
            self._server = await asyncio.start_server(self._handle, self.host, self._requested_port)
        except OSError as exc:
            raise PortUnavailable(str(exc)) from exc
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    async def stop(self) -> None:
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        for task in list(self._tasks):
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)

    async def _handle(self, client_reader: asyncio.StreamReader, client_writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        self._tasks.add(task)
        try:
            upstream = await self._connect_backend()
            if upstream is None:
                client_writer.close()
                return
            up_reader, up_writer = upstream
            await asyncio.gather(
                self._pipe(client_reader, up_writer),
                self._pipe(up_reader, client_writer),
                return_exceptions=True,
            )
        finally:
            self._tasks.discard(task)
            for w in (client_writer,):
                try:
                    w.close()
                except (ConnectionError, OSError):
                    pass

    async def _connect_backend(self):
        for _ in range(len(self.backends)):
            host, port = self.backends[self._counter % len(self.backends)]
            self._counter += 1
            try:
                return await asyncio.open_connection(host, port)
            except (ConnectionError, OSError):
                continue  # dead backend; round-robin onward
        return None

    @staticmethod
    async def _pipe(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                writer.write(chunk)
                await writer.drain()
        except (ConnectionError, OSError):
            pass
        finally:
            try:
                writer.close()
            except (ConnectionError, OSError):
                pass


class ClusterHandle:
    """Running cluster: instances, their shared store, and the front
    dispatcher."""

    def __init__(self, instances: list[SignalInstance], dispatcher: Dispatcher, store: DirectoryStore):
        self.instances = instances
        self.dispatcher = dispatcher
        self.store = store

    @property
    def ws_url(self) -> str:
        return f"ws://{self.dispatcher.address}/ws"

    def proxies_opened(self) -> int:
        return sum(inst.proxies_out for inst in self.instances)

    def live_rooms(self) -> int:
        return sum(len(inst.rooms) for inst in self.instances)

    async def kill_instance(self, index: int) -> None:
        await self.instances[index].stop()

    async def stop(self) -> None:
        await self.dispatcher.stop()
        for inst in self.instances:
            await inst.stop()


async def spawn_cluster(
    n: int,
    store_kind: str = "memory",
    store_path=None,
    *,
    host: str = "127.0.0.1",
    seed: int | None = None,
    room_ttl: float = 600.0,
    web_root: str | None = None,
    dispatcher_port: int = 0,
    store: DirectoryStore | None = None,
) -> ClusterHandle:
    """Start n instances on ephemeral ports plus the dispatcher."""
    if n < 1:
        raise ValueError("need at least one instance")
    if store is None:
        store = make_store(store_kind, store_path)
    instances = []
    try:
        for i in range(n):
            inst = SignalInstance(
                store,
                host=host,
                instance_id=f"i{i}",
                seed=None if seed is None else seed * 1000 + i,
                room_ttl=room_ttl,
                web_root=web_root,
            )
            await inst.start()
            instances.append(inst)
        dispatcher = await Dispatcher(
            [(host, inst.port) for inst in instances], host=host, port=dispatcher_port
        ).start()
    except Exception:
        for inst in instances:
            await inst.stop()
        raise
    return ClusterHandle(instances, dispatcher, store)
