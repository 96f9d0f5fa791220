"""Kernel configuration: TOML file in the data directory, validated at load.

Recognized keys: capacity.lambda, capacity.tick_interval_ms, costs.observe,
costs.create, costs.mutate, costs.execute_base, costs.execute_bytes_divisor,
hold.commitment_rate, log_rejections, origin, max_payload_bytes.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .energy import (
    DEFAULT_COMMITMENT_RATE,
    CapacityConfig,
    CostTable,
    parse_commitment_rate,
)
from .errors import ConfigError

DEFAULT_ORIGIN = "guardlog.local/log"
DEFAULT_MAX_PAYLOAD_BYTES = 1 << 20


@dataclass(frozen=True)
class KernelConfig:
    capacity: CapacityConfig = field(default_factory=CapacityConfig)
    costs: CostTable = field(default_factory=CostTable)
    commitment_rate: Fraction = DEFAULT_COMMITMENT_RATE
    log_rejections: bool = False
    origin: str = DEFAULT_ORIGIN
    max_payload_bytes: int = DEFAULT_MAX_PAYLOAD_BYTES

    def validate(self) -> "KernelConfig":
        self.costs.validate()
        self.capacity.validate(self.costs)
        if self.max_payload_bytes < 1:
            raise ConfigError("max_payload_bytes must be >= 1")
        if not self.origin or "\n" in self.origin:
            raise ConfigError("origin must be a non-empty single-line string")
        return self


def _expect_int(table: Mapping[str, Any], section: str, key: str, default: int) -> int:
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer")
    return value


def config_from_dict(raw: Mapping[str, Any]) -> KernelConfig:
    cap_raw = raw.get("capacity", {})
    cost_raw = raw.get("costs", {})
    hold_raw = raw.get("hold", {})
    if not isinstance(cap_raw, Mapping) or not isinstance(cost_raw, Mapping) or not isinstance(hold_raw, Mapping):
        raise ConfigError("capacity/costs/hold must be tables")
    capacity = CapacityConfig(
        lambda_per_sec=_expect_int(cap_raw, "capacity", "lambda", 100),
        tick_interval_ms=_expect_int(cap_raw, "capacity", "tick_interval_ms", 1000),
    )
    costs = CostTable(
        observe=_expect_int(cost_raw, "costs", "observe", 0),
        create=_expect_int(cost_raw, "costs", "create", 10),
        mutate=_expect_int(cost_raw, "costs", "mutate", 15),
        execute_base=_expect_int(cost_raw, "costs", "execute_base", 25),
        execute_bytes_divisor=_expect_int(cost_raw, "costs", "execute_bytes_divisor", 256),
    )
    rate = parse_commitment_rate(hold_raw.get("commitment_rate", DEFAULT_COMMITMENT_RATE))
    log_rejections = raw.get("log_rejections", False)
    if not isinstance(log_rejections, bool):
        raise ConfigError("log_rejections must be a boolean")
    origin = raw.get("origin", DEFAULT_ORIGIN)
    if not isinstance(origin, str):
        raise ConfigError("origin must be a string")
    max_payload = raw.get("max_payload_bytes", DEFAULT_MAX_PAYLOAD_BYTES)
    if isinstance(max_payload, bool) or not isinstance(max_payload, int):
        raise ConfigError("max_payload_bytes must be an integer")
    return KernelConfig(
        capacity=capacity,
        costs=costs,
        commitment_rate=rate,
        log_rejections=log_rejections,
        origin=origin,
        max_payload_bytes=max_payload,
    ).validate()


def load_config(path: Path) -> KernelConfig:
    if not path.exists():
        return KernelConfig().validate()
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from None
    return config_from_dict(raw)


def default_config_toml() -> str:
    return (
        "log_rejections = false\n"
        f'origin = "{DEFAULT_ORIGIN}"\n'
        "\n"
        "[capacity]\n"
        "lambda = 100\n"
        "tick_interval_ms = 1000\n"
        "\n"
        "[costs]\n"
        "observe = 0\n"
        "create = 10\n"
        "mutate = 15\n"
        "execute_base = 25\n"
        "execute_bytes_divisor = 256\n"
        "\n"
        "[hold]\n"
        "commitment_rate = 0.2\n"
    )
