"""Room lifecycle state machine, pure and transport-free.

One room hosts exactly one owner and at most one guest. Phases move
strictly forward:

    CREATED -> OWNER_WAITING -> NEGOTIATING -> ESTABLISHED -> CLOSED

Every event returns a StepResult describing which documents to deliver
to whom and whether the room just closed; the surrounding service owns
sockets and the directory entry. Keeping this layer pure lets the whole
(state x event) space be enumerated in tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import protocol
from .protocol import (
    ANSWER,
    ESTABLISHED,
    HANG_UP,
    ICE_CANDIDATE,
    OFFER,
    RELAY_FRAME,
    ERR_ILLEGAL_STATE,
    ERR_NO_PEER,
    ERR_PEER_GONE,
    ERR_ROOM_FULL,
    ERR_ROOM_NOT_FOUND,
    msg_error,
    msg_peer_joined,
    msg_room_created,
)


class Role(enum.Enum):
    OWNER = "owner"
    GUEST = "guest"

    @property
    def other(self) -> "Role":
        return Role.GUEST if self is Role.OWNER else Role.OWNER


class RoomPhase(enum.Enum):
    CREATED = "created"
    OWNER_WAITING = "owner_waiting"
    NEGOTIATING = "negotiating"
    ESTABLISHED = "established"
    CLOSED = "closed"


# targets for emitted documents
TO_OWNER = "owner"
TO_GUEST = "guest"
TO_JOINER = "joiner"  # a join attempt that was not admitted

_ROLE_TARGET = {Role.OWNER: TO_OWNER, Role.GUEST: TO_GUEST}


@dataclass
class StepResult:
    """Documents to deliver and whether the room closed on this step."""

    emits: list[tuple[str, dict]] = field(default_factory=list)
    closed: bool = False
    admitted_guest: bool = False

    def emit(self, target: str, doc: dict) -> "StepResult":
        self.emits.append((target, doc))
        return self


class RoomMachine:
    """State for one room. Not thread-safe; serialize per room."""

    def __init__(self, room_id: str):
        self.room_id = room_id
        self.phase = RoomPhase.CREATED
        self.owner_present = False
        self.guest_present = False

    def _present(self, role: Role) -> bool:
        return self.owner_present if role is Role.OWNER else self.guest_present

    def _set_present(self, role: Role, value: bool) -> None:
        if role is Role.OWNER:
            self.owner_present = value
        else:
            self.guest_present = value

    def _close(self, result: StepResult) -> StepResult:
        self.phase = RoomPhase.CLOSED
        self.owner_present = False
        self.guest_present = False
        result.closed = True
        return result

    # -- events ------------------------------------------------------------

    def attach_owner(self) -> StepResult:
        """Registration finished; the creating connection becomes owner."""
        if self.phase is not RoomPhase.CREATED:
            return StepResult().emit(TO_OWNER, msg_error(ERR_ILLEGAL_STATE, "room already open"))
        self.phase = RoomPhase.OWNER_WAITING
        self.owner_present = True
        return StepResult().emit(TO_OWNER, msg_room_created(self.room_id))

    def guest_join(self) -> StepResult:
        """A prospective guest asks to join."""
        if self.phase is RoomPhase.OWNER_WAITING:
            self.phase = RoomPhase.NEGOTIATING
            self.guest_present = True
            result = StepResult()
            result.admitted_guest = True
            result.emit(TO_OWNER, msg_peer_joined(self.room_id))
            result.emit(TO_GUEST, msg_peer_joined(self.room_id))
            return result
        if self.phase in (RoomPhase.NEGOTIATING, RoomPhase.ESTABLISHED):
            return StepResult().emit(TO_JOINER, msg_error(ERR_ROOM_FULL))
        # CREATED or CLOSED: the room is not joinable, effectively absent
        return StepResult().emit(TO_JOINER, msg_error(ERR_ROOM_NOT_FOUND))

    def message(self, sender: Role, doc: dict) -> StepResult:
        mtype = doc.get("type")
        back = _ROLE_TARGET[sender]
        if not self._present(sender):
            return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, "not in this room"))
        if mtype == HANG_UP:
            return self.detach(sender)
        if mtype == ESTABLISHED:
            if self.phase is RoomPhase.NEGOTIATING:
                self.phase = RoomPhase.ESTABLISHED
                return StepResult().emit(_ROLE_TARGET[sender.other], {"type": ESTABLISHED})
            return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, "not negotiating"))
        if mtype in (OFFER, ANSWER):
            if self.phase is RoomPhase.NEGOTIATING:
                return StepResult().emit(_ROLE_TARGET[sender.other], doc)
            return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, f"{mtype} only while negotiating"))
        if mtype in (ICE_CANDIDATE, RELAY_FRAME):
            if self.phase not in (RoomPhase.NEGOTIATING, RoomPhase.ESTABLISHED):
                return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, f"{mtype} before negotiation"))
            if mtype == RELAY_FRAME and _body_size(doc) > protocol.RELAY_FRAME_LIMIT:
                return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, "relay frame too large"))
            if not self._present(sender.other):
                return StepResult().emit(back, msg_error(ERR_NO_PEER))
            return StepResult().emit(_ROLE_TARGET[sender.other], doc)
        return StepResult().emit(back, msg_error(ERR_ILLEGAL_STATE, f"unexpected message {mtype!r}"))

    def detach(self, sender: Role) -> StepResult:
        """Hang-up or transport loss. Idempotent."""
        if self.phase is RoomPhase.CLOSED or not self._present(sender):
            return StepResult()
        self._set_present(sender, False)
        if self.phase in (RoomPhase.CREATED, RoomPhase.OWNER_WAITING):
            return self._close(StepResult())
        if self.phase is RoomPhase.NEGOTIATING:
            # losing either side before establishment strands the peer
            result = StepResult()
            other = sender.other
            if self._present(other):
                result.emit(_ROLE_TARGET[other], msg_error(ERR_PEER_GONE))
            return self._close(result)
        # ESTABLISHED: peers are on their own link; close once both left
        if not self.owner_present and not self.guest_present:
            return self._close(StepResult())
        return StepResult()

    def expire(self) -> StepResult:
        """TTL reap of an abandoned waiting room."""
        if self.phase is not RoomPhase.OWNER_WAITING:
            return StepResult()
        result = StepResult().emit(TO_OWNER, msg_error(ERR_ROOM_NOT_FOUND, "room expired"))
        return self._close(result)


def _body_size(doc: dict) -> int:
    body = doc.get("body")
    if not isinstance(body, str):
        return 0
    try:
        return len(protocol.body_to_blob(body))
    except protocol.ProtocolError:
        # unparseable body still counts; relaying never inspects it
        return len(body)
