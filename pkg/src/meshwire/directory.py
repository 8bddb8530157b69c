"""Room directory: the shared room-id -> instance mapping.

Two interchangeable stores implement per-key linearizable get, put,
delete, and compare-and-set: an in-memory dict for single-process runs
and tests, and a file-backed store (one JSON file per key, written by
atomic rename under an exclusive file lock) that survives restarts and
works across OS processes.
"""

from __future__ import annotations

import fcntl
import json
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict


class DirectoryError(Exception):
    pass


class Duplicate(DirectoryError):
    pass


class NotFound(DirectoryError):
    pass


@dataclass(frozen=True)
class RoomRecord:
    room_id: str
    instance: str  # advertised host:port of the owning instance
    state: str
    created_at: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RoomRecord":
        raw = json.loads(text)
        return RoomRecord(
            room_id=str(raw["room_id"]),
            instance=str(raw["instance"]),
            state=str(raw["state"]),
            created_at=float(raw["created_at"]),
        )


class DirectoryStore(ABC):
    """Per-key linearizable key-value store of RoomRecords."""

    @abstractmethod
    def get(self, room_id: str) -> RoomRecord | None: ...

    @abstractmethod
    def put(self, room_id: str, record: RoomRecord) -> None: ...

    @abstractmethod
    def delete(self, room_id: str) -> None: ...

    @abstractmethod
    def compare_and_set(
        self, room_id: str, expected: RoomRecord | None, new: RoomRecord | None
    ) -> bool:
        """Atomically replace expected with new; None means absent.
        Returns False (no change) when the current value differs."""

    @abstractmethod
    def count(self) -> int: ...


class MemoryDirectoryStore(DirectoryStore):
    def __init__(self):
        self._records: dict[str, RoomRecord] = {}
        self._lock = threading.Lock()

    def get(self, room_id):
        with self._lock:
            return self._records.get(room_id)

    def put(self, room_id, record):
        with self._lock:
            self._records[room_id] = record

    def delete(self, room_id):
        with self._lock:
            self._records.pop(room_id, None)

    def compare_and_set(self, room_id, expected, new):
        with self._lock:
            current = self._records.get(room_id)
            if current != expected:
                return False
            if new is None:
                self._records.pop(room_id, None)
            else:
                self._records[room_id] = new
            return True

    def count(self):
        with self._lock:
            return len(self._records)


class FileDirectoryStore(DirectoryStore):
    """One JSON file per room id under a directory.

    Writers take an exclusive flock on a per-key lock file, then publish
    via atomic rename, so readers never see partial records and CAS is
    race-free across processes sharing the path.
    """

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)

    def _record_path(self, room_id: str) -> str:
        return os.path.join(self.path, f"{room_id}.json")

    def _lock_path(self, room_id: str) -> str:
        return os.path.join(self.path, f"{room_id}.lock")

    def _read(self, room_id: str) -> RoomRecord | None:
        try:
            with open(self._record_path(room_id), "r", encoding="ascii") as fh:
                return RoomRecord.from_json(fh.read())
        except FileNotFoundError:
            return None

    def _write(self, room_id: str, record: RoomRecord | None) -> None:
        target = self._record_path(room_id)
        if record is None:
            try:
                os.unlink(target)
            except FileNotFoundError:
                pass
            return
        tmp = f"{target}.tmp.{os.getpid()}.{threading.get_ident()}"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write(record.to_json())
            fh.flush()
            os.fsync(fh.fileno())
        os.rename(tmp, target)

    def _locked(self, room_id: str):
        fh = open(self._lock_path(room_id), "a+")
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        return fh

    def get(self, room_id):
        return self._read(room_id)

    def put(self, room_id, record):
        fh = self._locked(room_id)
        try:
            self._write(room_id, record)
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
            fh.close()

    def delete(self, room_id):
        fh = self._locked(room_id)
        try:
            self._write(room_id, None)
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
            fh.close()

    def compare_and_set(self, room_id, expected, new):
        fh = self._locked(room_id)
        try:
            current = self._read(room_id)
            if current != expected:
                return False
            self._write(room_id, new)
            return True
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
            fh.close()

    def count(self):
        return sum(1 for name in os.listdir(self.path) if name.endswith(".json"))


def make_store(kind: str, path=None) -> DirectoryStore:
    if kind == "memory":
        return MemoryDirectoryStore()
    if kind == "file":
        if not path:
            raise DirectoryError("file store needs a path")
        return FileDirectoryStore(path)
    raise DirectoryError(f"unknown store kind {kind!r}")


def register_room(store: DirectoryStore, record: RoomRecord) -> None:
    """Insert a fresh room record; Duplicate when the id is taken."""
    if not store.compare_and_set(record.room_id, None, record):
        raise Duplicate(f"room {record.room_id} already registered")


def lookup_room(store: DirectoryStore, room_id: str) -> str:
    """Address of the instance owning room_id; NotFound otherwise."""
    record = store.get(room_id)
    if record is None:
        raise NotFound(f"room {room_id} not in directory")
    return record.instance


def fresh_record(room_id: str, instance: str, state: str) -> RoomRecord:
    return RoomRecord(room_id=room_id, instance=instance, state=state, created_at=time.time())
