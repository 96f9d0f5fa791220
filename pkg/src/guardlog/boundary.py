"""Capability checker: glob writable targets, default deny, privileged
namespaces, root override."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .model import Actor, ActorKind, ActorStatus, ActionType
from .patterns import match_pattern, pattern_covers, validate_pattern

WILDCARD_ACTION = "*"

# Only root writes under these; ledger/hold/* mutate is additionally open to
# humans so approval decisions can be committed as ordinary actions.
PRIVILEGED_PREFIXES = ("system", "ledger")
HOLD_RESPONSE_PATTERN = "ledger/hold/*"


@dataclass(frozen=True)
class WritableEntry:
    pattern: str
    action: str  # ActionType value or "*"

    def __post_init__(self) -> None:
        validate_pattern(self.pattern)
        if self.action != WILDCARD_ACTION:
            ActionType(self.action)

    def allows(self, target: str, type: ActionType) -> bool:
        if self.action != WILDCARD_ACTION and self.action != type.value:
            return False
        return match_pattern(self.pattern, target)

    def covers(self, target_pattern: str, type: ActionType) -> bool:
        """Containment check used for envelope issuance: does this entry
        authorize every (target, type) the given pattern could reach?"""
        if self.action != WILDCARD_ACTION and self.action != type.value:
            return False
        return pattern_covers(self.pattern, target_pattern)

    def to_doc(self) -> dict:
        return {"pattern": self.pattern, "action": self.action}


@dataclass(frozen=True)
class WritableSet:
    entries: Tuple[WritableEntry, ...]

    @classmethod
    def of(cls, *pairs: Tuple[str, str]) -> "WritableSet":
        return cls(tuple(WritableEntry(p, a) for p, a in pairs))

    def allows(self, target: str, type: ActionType) -> bool:
        return any(e.allows(target, type) for e in self.entries)

    def covers(self, target_pattern: str, type: ActionType) -> bool:
        return any(e.covers(target_pattern, type) for e in self.entries)

    def to_doc(self) -> list:
        return [e.to_doc() for e in self.entries]

    @classmethod
    def from_doc(cls, doc: list) -> "WritableSet":
        return cls(tuple(WritableEntry(e["pattern"], e["action"]) for e in doc))


ROOT_WRITABLE = WritableSet.of(("**", WILDCARD_ACTION))


@dataclass(frozen=True)
class BoundaryDecision:
    validated: bool
    reason: Optional[str] = None

    @classmethod
    def ok(cls) -> "BoundaryDecision":
        return cls(True)

    @classmethod
    def reject(cls, reason: str) -> "BoundaryDecision":
        return cls(False, reason)


def is_privileged(target: str) -> bool:
    head = target.split("/", 1)[0]
    return head in PRIVILEGED_PREFIXES


def check(
    actor: Actor,
    writable: WritableSet,
    type: ActionType,
    target: str,
    is_root: bool,
) -> BoundaryDecision:
    """Default-deny capability decision for one (actor, type, target).

    Observe is exempt from writable-target matching (reads; W governs
    writes). Privileged namespaces are writable only by root, except
    ledger/hold/* mutate which any human may use for hold responses.
    """
    if actor.status != ActorStatus.ACTIVE:
        return BoundaryDecision.reject(f"actor {actor.id} is not active")
    if type == ActionType.OBSERVE:
        return BoundaryDecision.ok()
    if is_root:
        return BoundaryDecision.ok()
    if is_privileged(target):
        if (
            actor.kind == ActorKind.HUMAN
            and type == ActionType.MUTATE
            and match_pattern(HOLD_RESPONSE_PATTERN, target)
        ):
            return BoundaryDecision.ok()
        return BoundaryDecision.reject(f"privileged target {target} is writable only by root")
    if writable.allows(target, type):
        return BoundaryDecision.ok()
    return BoundaryDecision.reject(f"no writable entry matches ({target}, {type.value})")
