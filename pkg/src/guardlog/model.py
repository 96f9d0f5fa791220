"""Domain vocabulary shared by every module: actors, actions, events, receipts,
and their canonical byte encodings."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .canonical import canonical_encode
from .errors import PayloadError

TARGET_SEGMENT_RE = re.compile(r"[a-z0-9_.\-]+\Z")
OID_RE = re.compile(r"sha256:[0-9a-f]{64}\Z")

# Reserved payload keys set by the kernel's hold-approve replay; external
# submissions carrying them are rejected at validate.
HOLD_APPROVED_MARKER = "_hold_approved"
HOLD_RESERVED_COST_MARKER = "_hold_reserved_cost"


class ActionType(str, Enum):
    OBSERVE = "observe"
    CREATE = "create"
    MUTATE = "mutate"
    EXECUTE = "execute"

    @classmethod
    def parse(cls, name: str) -> "ActionType":
        try:
            return cls(name.lower())
        except ValueError:
            raise PayloadError(f"unknown action type: {name!r}") from None


STATE_CHANGING = (ActionType.CREATE, ActionType.MUTATE, ActionType.EXECUTE)


class ActorKind(str, Enum):
    HUMAN = "human"
    AGENT = "agent"


class ActorStatus(str, Enum):
    ACTIVE = "active"
    EXPIRED = "expired"


@dataclass(frozen=True)
class Actor:
    id: str
    kind: ActorKind
    creator: Optional[str] = None  # required iff kind == AGENT
    purpose: Optional[str] = None  # required iff kind == AGENT
    expiry: Optional[int] = None  # ns since epoch; never set for humans
    share: int = 1
    status: ActorStatus = ActorStatus.ACTIVE

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "creator": self.creator,
            "purpose": self.purpose,
            "expiry": self.expiry,
            "share": self.share,
            "status": self.status.value,
        }


@dataclass(frozen=True)
class Action:
    actor: str
    type: ActionType
    target: str
    payload: Any
    timestamp: int
    envelope: Optional[str] = None


@dataclass(frozen=True)
class Event:
    """One committed, hashed log record; the unit of history."""

    id: str
    seq: int
    actor: str
    type: ActionType
    target: str
    payload: Any
    payload_hash: bytes
    timestamp: int
    artifact_hash: Optional[bytes]
    reserved_energy: int
    settled_energy: int
    event_hash: bytes

    def to_doc(self) -> dict:
        """Full event record as a JSON document (canonical-encodable)."""
        return {
            "id": self.id,
            "seq": self.seq,
            "actor": self.actor,
            "type": self.type.value,
            "target": self.target,
            "payload": self.payload,
            "payload_hash": self.payload_hash.hex(),
            "timestamp": self.timestamp,
            "artifact_hash": self.artifact_hash.hex() if self.artifact_hash else None,
            "reserved_energy": self.reserved_energy,
            "settled_energy": self.settled_energy,
            "event_hash": self.event_hash.hex(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Event":
        return cls(
            id=doc["id"],
            seq=doc["seq"],
            actor=doc["actor"],
            type=ActionType(doc["type"]),
            target=doc["target"],
            payload=doc["payload"],
            payload_hash=bytes.fromhex(doc["payload_hash"]),
            timestamp=doc["timestamp"],
            artifact_hash=bytes.fromhex(doc["artifact_hash"]) if doc.get("artifact_hash") else None,
            reserved_energy=doc["reserved_energy"],
            settled_energy=doc["settled_energy"],
            event_hash=bytes.fromhex(doc["event_hash"]),
        )


@dataclass(frozen=True)
class Receipt:
    event_id: str
    log_index: int
    event_hash: bytes

    def to_doc(self) -> dict:
        return {
            "event_id": self.event_id,
            "log_index": self.log_index,
            "event_hash": self.event_hash.hex(),
        }


class OutcomeStatus(str, Enum):
    COMMITTED = "committed"
    HOLD_TRIGGERED = "hold_triggered"
    REJECTED = "rejected"
    INSUFFICIENT_ENERGY = "insufficient_energy"


@dataclass(frozen=True)
class SubmitOutcome:
    """Exactly four outcomes exist for any submission."""

    status: OutcomeStatus
    receipt: Optional[Receipt] = None
    hold_id: Optional[str] = None
    reason: Optional[str] = None

    @classmethod
    def committed(cls, receipt: Receipt) -> "SubmitOutcome":
        return cls(OutcomeStatus.COMMITTED, receipt=receipt)

    @classmethod
    def hold_triggered(cls, hold_id: str) -> "SubmitOutcome":
        return cls(OutcomeStatus.HOLD_TRIGGERED, hold_id=hold_id)

    @classmethod
    def rejected(cls, reason: str) -> "SubmitOutcome":
        return cls(OutcomeStatus.REJECTED, reason=reason)

    @classmethod
    def insufficient_energy(cls) -> "SubmitOutcome":
        return cls(OutcomeStatus.INSUFFICIENT_ENERGY)

    def to_doc(self) -> dict:
        doc: dict = {"status": self.status.value}
        if self.receipt is not None:
            doc["receipt"] = self.receipt.to_doc()
        if self.hold_id is not None:
            doc["hold_id"] = self.hold_id
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc


def valid_target(target: str) -> bool:
    """Target paths are /-separated ASCII segments of [a-z0-9_.-]+."""
    if not target:
        return False
    return all(TARGET_SEGMENT_RE.match(seg) for seg in target.split("/"))


def valid_oid(value: Any) -> bool:
    return isinstance(value, str) and OID_RE.match(value) is not None


def oid_digest(value: str) -> bytes:
    """32 raw bytes referenced by a `sha256:<64 hex>` content id."""
    if not valid_oid(value):
        raise PayloadError(f"malformed OID: {value!r}")
    return bytes.fromhex(value[len("sha256:"):])


def payload_hash(payload: Any) -> bytes:
    return hashlib.sha256(canonical_encode(payload)).digest()


def event_preimage_body(
    id: str,
    seq: int,
    actor: str,
    type: ActionType,
    target: str,
    payload: Any,
    payload_digest: bytes,
    timestamp: int,
    artifact_digest: Optional[bytes],
    reserved_energy: int,
    settled_energy: int,
) -> bytes:
    """Canonical bytes of the 11 non-hash event fields, in fixed order.

    Encoded as a JSON array so the order is part of the byte stream; an absent
    artifact hash encodes as null. The event hash is the 0x00-prefixed SHA-256
    of these bytes, which doubles as the log's Merkle leaf hash.
    """
    return canonical_encode(
        [
            id,
            seq,
            actor,
            type.value,
            target,
            payload,
            payload_digest.hex(),
            timestamp,
            artifact_digest.hex() if artifact_digest else None,
            reserved_energy,
            settled_energy,
        ]
    )


def event_preimage(e: Event) -> bytes:
    """0x00 domain-separation byte followed by the canonical field encoding."""
    return b"\x00" + event_preimage_body(
        e.id, e.seq, e.actor, e.type, e.target, e.payload, e.payload_hash,
        e.timestamp, e.artifact_hash, e.reserved_energy, e.settled_energy,
    )
