"""Tamper-evident, independently verifiable action ledger for AI agents."""

from .config import KernelConfig
from .energy import CapacityConfig, CostTable
from .kernel import FixedClock, Kernel, ROOT_ACTOR_ID, seeded_id_gen
from .model import ActionType, ActorKind, Event, OutcomeStatus, Receipt, SubmitOutcome

__all__ = [
    "ActionType",
    "ActorKind",
    "CapacityConfig",
    "CostTable",
    "Event",
    "FixedClock",
    "Kernel",
    "KernelConfig",
    "OutcomeStatus",
    "ROOT_ACTOR_ID",
    "Receipt",
    "SubmitOutcome",
    "seeded_id_gen",
]

__version__ = "0.1.0"
