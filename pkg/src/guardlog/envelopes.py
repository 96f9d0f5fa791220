"""Envelopes (budgeted delegated authority) and hold requests.

Accounting model: an envelope's pool is funded once (from the issuer's
balance, or carved out of a parent envelope) and only ever shrinks through
consumption, carve-outs to children, or a final refund to its funding source.
Reservations stay inside the pool until settled or released, so

    available = budget + refunded_in - consumed - carved - refunded_out - reserved

is never negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from .errors import StateError
from .model import (
    Action,
    ActionType,
    HOLD_APPROVED_MARKER,
)
from .patterns import match_pattern


class EnvelopeState(str, Enum):
    ACTIVE = "active"
    EXPIRED = "expired"
    EXHAUSTED = "exhausted"


class HoldState(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"
    TIMED_OUT = "timed_out"


@dataclass
class Envelope:
    id: str
    issuer: str
    holder: str
    budget: int
    targets: List[str]
    actions: List[str]  # ActionType values
    issued_at: int
    consumed: int = 0
    reserved: int = 0
    refunded_in: int = 0
    carved: int = 0
    refunded_out: int = 0
    expires_at: Optional[int] = None
    checkpoint: Optional[int] = None  # action-count review mark; stored, not enforced
    hold_on: List[Tuple[str, str]] = field(default_factory=list)
    hold_timeout_secs: Optional[int] = None
    state: EnvelopeState = EnvelopeState.ACTIVE
    parent: Optional[str] = None

    def available(self) -> int:
        return (
            self.budget
            + self.refunded_in
            - self.consumed
            - self.carved
            - self.refunded_out
            - self.reserved
        )

    def remaining(self) -> int:
        """Spendable plus reserved: what the pool still holds."""
        return self.available() + self.reserved

    def covers(self, target: str, type: ActionType) -> bool:
        if type.value not in self.actions:
            return False
        return any(match_pattern(p, target) for p in self.targets)

    def reserve(self, amount: int) -> bool:
        if self.available() < amount:
            return False
        self.reserved += amount
        return True

    def settle_reserved(self, amount: int, actual: int) -> None:
        """Convert a held reservation into consumption; excess returns to the
        pool implicitly."""
        if actual > amount:
            raise StateError("settled amount exceeds the reservation")
        if self.reserved < amount:
            raise StateError("settling more than is reserved")
        self.reserved -= amount
        self.consumed += actual
        if self.consumed >= self.budget + self.refunded_in - self.carved - self.refunded_out:
            if self.reserved == 0 and self.state == EnvelopeState.ACTIVE:
                self.state = EnvelopeState.EXHAUSTED

    def release_reserved(self, amount: int) -> None:
        if self.reserved < amount:
            raise StateError("releasing more than is reserved")
        self.reserved -= amount

    def to_doc(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "issuer": self.issuer,
            "holder": self.holder,
            "budget": self.budget,
            "consumed": self.consumed,
            "reserved": self.reserved,
            "refunded_in": self.refunded_in,
            "carved": self.carved,
            "refunded_out": self.refunded_out,
            "targets": list(self.targets),
            "actions": list(self.actions),
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
            "checkpoint": self.checkpoint,
            "hold_on": [[p, a] for p, a in self.hold_on],
            "hold_timeout_secs": self.hold_timeout_secs,
            "state": self.state.value,
            "parent": self.parent,
        }

    @classmethod
    def from_doc(cls, doc: Dict[str, Any]) -> "Envelope":
        return cls(
            id=doc["id"],
            issuer=doc["issuer"],
            holder=doc["holder"],
            budget=doc["budget"],
            targets=list(doc["targets"]),
            actions=list(doc["actions"]),
            issued_at=doc["issued_at"],
            consumed=doc["consumed"],
            reserved=doc["reserved"],
            refunded_in=doc["refunded_in"],
            carved=doc["carved"],
            refunded_out=doc["refunded_out"],
            expires_at=doc.get("expires_at"),
            checkpoint=doc.get("checkpoint"),
            hold_on=[(p, a) for p, a in doc["hold_on"]],
            hold_timeout_secs=doc.get("hold_timeout_secs"),
            state=EnvelopeState(doc["state"]),
            parent=doc.get("parent"),
        )


def match_hold(env: Envelope, action: Action) -> bool:
    """True iff a hold rule matches the action. Suppressed when the payload
    carries the kernel's approve-replay marker, which turns the rule check
    into a no-op."""
    if isinstance(action.payload, dict) and action.payload.get(HOLD_APPROVED_MARKER):
        return False
    for pattern, type_value in env.hold_on:
        if type_value != "*" and type_value != action.type.value:
            continue
        if match_pattern(pattern, action.target):
            return True
    return False


@dataclass
class HoldRequest:
    id: str
    envelope: str
    actor: str
    type: str
    target: str
    payload: Any
    action_timestamp: int
    reserved_cost: int
    created_at: int
    state: HoldState
    request_event_seq: int
    decider: Optional[str] = None
    decided_at: Optional[int] = None

    def deadline(self, timeout_secs: Optional[int]) -> Optional[int]:
        if timeout_secs is None:
            return None
        return self.created_at + timeout_secs * 1_000_000_000

    def to_doc(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "envelope": self.envelope,
            "actor": self.actor,
            "type": self.type,
            "target": self.target,
            "payload": self.payload,
            "action_timestamp": self.action_timestamp,
            "reserved_cost": self.reserved_cost,
            "created_at": self.created_at,
            "state": self.state.value,
            "request_event_seq": self.request_event_seq,
            "decider": self.decider,
            "decided_at": self.decided_at,
        }

    @classmethod
    def from_doc(cls, doc: Dict[str, Any]) -> "HoldRequest":
        return cls(
            id=doc["id"],
            envelope=doc["envelope"],
            actor=doc["actor"],
            type=doc["type"],
            target=doc["target"],
            payload=doc["payload"],
            action_timestamp=doc["action_timestamp"],
            reserved_cost=doc["reserved_cost"],
            created_at=doc["created_at"],
            state=HoldState(doc["state"]),
            request_event_seq=doc["request_event_seq"],
            decider=doc.get("decider"),
            decided_at=doc.get("decided_at"),
        )
