"""Energy accounting: capacity config, cost quoting, share allocation,
reserve/settle arithmetic, commitment-cost settlement.

All quantities are unsigned integers in whole units; the commitment rate is
handled as an exact fraction so no float ever touches a balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Mapping

from .errors import ConfigError, PayloadError, StateError
from .model import ActionType

DEFAULT_COMMITMENT_RATE = Fraction(1, 5)


@dataclass(frozen=True)
class CostTable:
    observe: int = 0
    create: int = 10
    mutate: int = 15
    execute_base: int = 25
    execute_bytes_divisor: int = 256

    def validate(self) -> None:
        for name in ("observe", "create", "mutate", "execute_base"):
            if getattr(self, name) < 0:
                raise ConfigError(f"costs.{name} must be >= 0")
        if self.execute_bytes_divisor < 1:
            raise ConfigError("costs.execute_bytes_divisor must be >= 1")
        if not self.observe <= self.create <= self.mutate <= self.execute_base:
            raise ConfigError(
                "cost table violates observe <= create <= mutate <= execute_base"
            )

    def max_base_cost(self) -> int:
        return max(self.observe, self.create, self.mutate, self.execute_base)


@dataclass(frozen=True)
class CapacityConfig:
    lambda_per_sec: int = 100
    tick_interval_ms: int = 1000

    def validate(self, costs: CostTable) -> None:
        if self.lambda_per_sec < 1:
            raise ConfigError("capacity.lambda must be >= 1")
        if self.tick_interval_ms < 1:
            raise ConfigError("capacity.tick_interval_ms must be >= 1")
        if self.tick_production() < costs.max_base_cost():
            raise ConfigError(
                "production per tick (lambda * tick interval) is below the most "
                "expensive action type; budgets could never fund it"
            )

    def tick_production(self) -> int:
        # lambda is per second; interval is ms. Whole units only.
        return self.lambda_per_sec * self.tick_interval_ms // 1000

    def tick_interval_ns(self) -> int:
        return self.tick_interval_ms * 1_000_000


def quote_cost(costs: CostTable, type: ActionType, payload: Any) -> int:
    """Energy price of one action under the given table."""
    if type == ActionType.OBSERVE:
        return costs.observe
    if type == ActionType.CREATE:
        return costs.create
    if type == ActionType.MUTATE:
        return costs.mutate
    output_bytes = 0
    if isinstance(payload, Mapping) and "output_bytes" in payload:
        value = payload["output_bytes"]
        if isinstance(value, bool) or not isinstance(value, int):
            raise PayloadError("output_bytes must be an integer")
        if value < 0:
            raise PayloadError("output_bytes must be >= 0")
        output_bytes = value
    return costs.execute_base + output_bytes // costs.execute_bytes_divisor


def commitment_cost(rate: Fraction, reserved: int) -> int:
    """Slice of a reservation consumed on reject/timeout: ceil(rate * reserved)."""
    if reserved < 0:
        raise ValueError("reserved must be >= 0")
    return math.ceil(rate * reserved)


class ReservationState(str, Enum):
    HELD = "held"
    SETTLED = "settled"
    RELEASED = "released"


@dataclass
class Reservation:
    """Earmarked energy with a single terminal transition: HELD -> SETTLED
    (full or partial consumption) or HELD -> RELEASED (commitment slice only,
    or nothing)."""

    id: str
    holder: str  # envelope id or actor id
    amount: int
    state: ReservationState = field(default=ReservationState.HELD)


def settle(r: Reservation, actual: int) -> int:
    """Consume `actual` of the reservation; the excess returns to the pool.
    Returns the consumed amount."""
    if r.state != ReservationState.HELD:
        raise StateError(f"reservation {r.id} is already {r.state.value}")
    if actual > r.amount:
        raise StateError("actual cost exceeds the reservation")
    if actual < 0:
        raise StateError("actual cost must be >= 0")
    r.state = ReservationState.SETTLED
    return actual


def settle_commitment(r: Reservation, rate: Fraction = DEFAULT_COMMITMENT_RATE) -> int:
    """Reject/timeout settlement: consume ceil(rate * amount), release the
    rest. Returns the commitment actually consumed."""
    if r.state != ReservationState.HELD:
        raise StateError(f"reservation {r.id} is already {r.state.value}")
    r.state = ReservationState.RELEASED
    return commitment_cost(rate, r.amount)


def release(r: Reservation) -> int:
    """Return the full reservation to the pool (nothing consumed)."""
    if r.state != ReservationState.HELD:
        raise StateError(f"reservation {r.id} is already {r.state.value}")
    r.state = ReservationState.RELEASED
    return r.amount


def allocate_shares(production: int, shares: Mapping[str, int]) -> Dict[str, int]:
    """Per-tick credit for each actor: floor(share/total * production).

    Remainder units stay unminted so conservation is exact.
    """
    total = sum(shares.values())
    if total <= 0:
        return {actor: 0 for actor in shares}
    return {actor: share * production // total for actor, share in shares.items()}


def parse_commitment_rate(value: Any) -> Fraction:
    """Exact fraction from a config value (float literal, string, or int)."""
    if isinstance(value, Fraction):
        rate = value
    elif isinstance(value, bool):
        raise ConfigError("hold.commitment_rate must be a number")
    elif isinstance(value, int):
        rate = Fraction(value)
    elif isinstance(value, float) or isinstance(value, str):
        try:
            rate = Fraction(str(value))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad hold.commitment_rate: {value!r}") from None
    else:
        raise ConfigError(f"bad hold.commitment_rate: {value!r}")
    if not 0 <= rate <= 1:
        raise ConfigError("hold.commitment_rate must be within [0, 1]")
    return rate
