"""Adversarial invariant suite and benchmarks.

Each invariant scenario runs against a fresh kernel in a throwaway directory
and checks the exact expectations of the published runs: tamper detection
after a raw store edit (append-only), 15 events out of 20 submissions
(completeness), 10/10 independently verified proofs plus consistency 10->15
(integrity), the 7-case boundary matrix (boundary enforcement), and the
100->10 budget descent plus the 1000->997 commitment settlement (energy
conservation).
"""

from __future__ import annotations

import statistics
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from . import verifier
from .config import KernelConfig
from .energy import CapacityConfig, CostTable
from .kernel import FixedClock, Kernel, seeded_id_gen
from .model import ActorKind, OutcomeStatus
from .store import tamper_event_payload

OID = "sha256:" + "ab" * 32
EXEC_PAYLOAD = {
    "input_oid": OID,
    "output_oid": OID,
    "exit_code": 0,
    "artifact_hash": "sha256:" + "cd" * 32,
}


@dataclass
class ScenarioResult:
    invariant: str
    steps: int
    expected: str
    observed: str
    passed: bool
    elapsed_ms: int
    failures: List[str] = field(default_factory=list)


class Checks:
    def __init__(self) -> None:
        self.failures: List[str] = []
        self.steps = 0

    def expect(self, condition: bool, message: str) -> None:
        self.steps += 1
        if not condition:
            self.failures.append(message)


def _fresh_kernel(base: Path, name: str, lam: int = 100_000) -> Kernel:
    config = KernelConfig(
        capacity=CapacityConfig(lambda_per_sec=lam, tick_interval_ms=1000),
        costs=CostTable(),
    )
    return Kernel.init(
        str(base / name), config=config, clock=FixedClock(), id_gen=seeded_id_gen(41)
    )


def _tick(kernel: Kernel) -> None:
    kernel.clock.advance(2_000_000_000)
    kernel.tick()


def _scenario(invariant: str, expected: str, body: Callable[[Checks, Path], str]) -> ScenarioResult:
    checks = Checks()
    started = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="guardlog-harness-") as tmp:
        observed = body(checks, Path(tmp))
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    return ScenarioResult(
        invariant=invariant,
        steps=checks.steps,
        expected=expected,
        observed=observed,
        passed=not checks.failures,
        elapsed_ms=elapsed_ms,
        failures=checks.failures,
    )


# -- INV-1: append-only / tamper evidence ---------------------------------------

def scenario_inv1() -> ScenarioResult:
    def body(c: Checks, tmp: Path) -> str:
        k = _fresh_kernel(tmp, "inv1")
        for i in range(5):
            outcome = k.submit_action("root", "observe", f"workspace/note-{i}", {"n": i})
            c.expect(outcome.status == OutcomeStatus.COMMITTED, f"action {i} did not commit")
        original_root = k.tree.root()
        stored_before = k.store.get_event(3)
        # privileged out-of-band edit, bypassing the kernel entirely
        tamper_event_payload(str(tmp / "inv1" / "kernel.db"), 3, {"n": "tampered"})
        tampered = k.store.get_event(3)
        _, recomputed_leaf = verifier.leaf_hash_of_event(tampered.to_doc())
        c.expect(
            recomputed_leaf != stored_before.event_hash,
            "recomputed event hash did not diverge after tampering",
        )
        proof = k.prove_inclusion(3)
        ok = verifier.verify_inclusion_path(
            original_root, k.tree.size, 2, recomputed_leaf, proof.path
        )
        c.expect(not ok, "inclusion proof unexpectedly verified tampered payload")
        untampered_ok = verifier.verify_inclusion_path(
            original_root, k.tree.size, 2, stored_before.event_hash, proof.path
        )
        c.expect(untampered_ok, "control check failed: honest leaf must verify")
        k.close()
        return (
            f"hash diverged {stored_before.event_hash.hex()[:4]}... -> "
            f"{recomputed_leaf.hex()[:4]}...; verification failed as expected"
        )

    return _scenario(
        "INV-1 (Append-Only)",
        "raw payload edit detected: recomputed leaf diverges, inclusion proof fails",
        body,
    )


# -- INV-2: completeness -----------------------------------------------------------

def scenario_inv2() -> ScenarioResult:
    def body(c: Checks, tmp: Path) -> str:
        k = _fresh_kernel(tmp, "inv2")
        k.register_actor("root", "alice", ActorKind.HUMAN,
                         writable=[("workspace/**", "*")])
        k.register_actor("alice", "worker", ActorKind.AGENT, purpose="completeness probe",
                         writable=[("workspace/**", "create"), ("workspace/**", "mutate")])
        _tick(k)
        before = k.store.event_count()
        committed = rejected = 0
        for i in range(5):
            out = k.submit_action("worker", "observe", f"workspace/obs-{i}", {})
            committed += out.status == OutcomeStatus.COMMITTED
        for i in range(5):
            out = k.submit_action("worker", "create", f"workspace/new-{i}", {})
            committed += out.status == OutcomeStatus.COMMITTED
        for i in range(5):
            out = k.submit_action("worker", "mutate", f"workspace/mut-{i}", {})
            committed += out.status == OutcomeStatus.COMMITTED
        for i in range(5):
            out = k.submit_action("worker", "mutate", f"system/cfg-{i}", {})
            rejected += out.status == OutcomeStatus.REJECTED
        delta = k.store.event_count() - before
        c.expect(committed == 15, f"expected 15 committed, got {committed}")
        c.expect(rejected == 5, f"expected 5 rejections, got {rejected}")
        c.expect(delta == 15, f"expected exactly 15 new events, got {delta}")
        # hold recording, tested separately on the same kernel
        env = k.issue_envelope("alice", "worker", 100, ["workspace/**"], ["mutate"],
                               hold_on=[("workspace/danger/**", "mutate")])
        hold_out = k.submit_action("worker", "mutate", "workspace/danger/x", {},
                                   envelope=env.id)
        c.expect(hold_out.status == OutcomeStatus.HOLD_TRIGGERED, "hold did not trigger")
        k.respond_hold("alice", hold_out.hold_id, "reject")
        hold_events = k.read_events(target_prefix="ledger/hold")
        kinds = [e.payload.get("kind", e.payload.get("decision")) for e in hold_events]
        c.expect("hold_request" in kinds, "hold_request event missing")
        c.expect("reject" in kinds, "hold_response event missing")
        k.close()
        return f"{committed} events committed, {rejected} silent rejections, hold pair recorded"

    return _scenario(
        "INV-2 (Completeness)",
        "20 submissions: 15 events, 5 rejections with no log entries; hold pair recorded",
        body,
    )


# -- INV-3: integrity ------------------------------------------------------------------

def scenario_inv3() -> ScenarioResult:
    def body(c: Checks, tmp: Path) -> str:
        k = _fresh_kernel(tmp, "inv3")
        for i in range(10):
            k.submit_action("root", "observe", f"workspace/ev-{i}", {"i": i})
        c.expect(k.tree.size == 10, f"expected log size 10, got {k.tree.size}")
        root10 = k.tree.root()
        verified = 0
        path_lengths = []
        for seq in range(1, 11):
            event = k.store.get_event(seq)
            _, leaf = verifier.leaf_hash_of_event(event.to_doc())
            proof = k.prove_inclusion(seq)
            path_lengths.append(len(proof.path))
            if verifier.verify_inclusion_path(root10, 10, seq - 1, leaf, proof.path):
                verified += 1
        c.expect(verified == 10, f"only {verified}/10 proofs verified")
        c.expect(max(path_lengths) == 4, f"max path length {max(path_lengths)} != 4")
        c.expect(sum(path_lengths) == 36, f"mean path length {sum(path_lengths)/10} != 3.6")
        for i in range(5):
            k.submit_action("root", "observe", f"workspace/extra-{i}", {})
        c.expect(k.tree.size == 15, "log did not grow to 15")
        cons = k.prove_consistency(10, 15)
        ok = verifier.verify_consistency_path(root10, 10, k.tree.root(), 15, cons.path)
        c.expect(ok, "consistency proof 10->15 failed")
        k.close()
        return "10/10 proofs verified (max 4 hashes, mean 3.6); consistency(10,15) verified"

    return _scenario(
        "INV-3 (Integrity)",
        "independent verifier passes 10/10 inclusion proofs and consistency(10,15)",
        body,
    )


# -- INV-4: boundary enforcement ----------------------------------------------------------

def scenario_inv4() -> ScenarioResult:
    def body(c: Checks, tmp: Path) -> str:
        k = _fresh_kernel(tmp, "inv4")
        k.register_actor("root", "alice", ActorKind.HUMAN,
                         writable=[("workspace/**", "*")])
        k.register_actor("alice", "docsbot", ActorKind.AGENT, purpose="docs only",
                         writable=[("workspace/docs/*", "mutate")])
        _tick(k)
        matrix = [
            ("in-bounds mutate", "docsbot", "mutate", "workspace/docs/a.md",
             OutcomeStatus.COMMITTED),
            ("out-of-bounds target", "docsbot", "mutate", "workspace/code/x.rs",
             OutcomeStatus.REJECTED),
            ("disallowed action type", "docsbot", "create", "workspace/docs/new.md",
             OutcomeStatus.REJECTED),
            ("privileged system target", "docsbot", "mutate", "system/config",
             OutcomeStatus.REJECTED),
            ("privileged ledger target", "docsbot", "mutate", "ledger/anything",
             OutcomeStatus.REJECTED),
            ("observe exemption", "docsbot", "observe", "workspace/code/y.rs",
             OutcomeStatus.COMMITTED),
            ("root override", "root", "mutate", "system/config",
             OutcomeStatus.COMMITTED),
        ]
        passed = 0
        before = k.store.event_count()
        expected_new = 0
        for name, actor, type_, target, expected in matrix:
            outcome = k.submit_action(actor, type_, target, {})
            good = outcome.status == expected
            passed += good
            expected_new += expected == OutcomeStatus.COMMITTED
            c.expect(good, f"{name}: expected {expected.value}, got {outcome.status.value}")
        delta = k.store.event_count() - before
        c.expect(
            delta == expected_new,
            f"rejections must produce no log entries (delta {delta} != {expected_new})",
        )
        k.close()
        return f"{passed}/7 scenarios matched expected behavior"

    return _scenario(
        "INV-4 (Boundary Enforcement)",
        "7/7 matrix outcomes; rejected actions leave no log entries",
        body,
    )


# -- INV-5: energy conservation ---------------------------------------------------------------

def scenario_inv5() -> ScenarioResult:
    def body(c: Checks, tmp: Path) -> str:
        k = _fresh_kernel(tmp, "inv5")
        k.register_actor("root", "alice", ActorKind.HUMAN,
                         writable=[("workspace/**", "*")])
        k.register_actor("alice", "bot", ActorKind.AGENT, purpose="budget probe",
                         writable=[("workspace/docs/*", "mutate")])
        _tick(k)

        def no_negative() -> bool:
            balances = k.store.all_balances()
            pools = [
                doc["budget"] + doc["refunded_in"] - doc["consumed"] - doc["carved"]
                - doc["refunded_out"] - doc["reserved"]
                for doc in k.list_envelopes()
            ]
            return all(v >= 0 for b in balances.values() for v in b) and all(
                p >= 0 for p in pools
            )

        env = k.issue_envelope("alice", "bot", 100, ["workspace/docs/*"], ["mutate"])
        trace = [k.get_envelope_doc(env.id)["available"]]
        for _ in range(6):
            out = k.submit_action("bot", "mutate", "workspace/docs/a.md", {},
                                  envelope=env.id)
            c.expect(out.status == OutcomeStatus.COMMITTED, "funded mutate failed")
            c.expect(no_negative(), "negative balance observed")
            trace.append(k.get_envelope_doc(env.id)["available"])
        c.expect(
            trace == [100, 85, 70, 55, 40, 25, 10],
            f"balance trace {trace} != [100, 85, 70, 55, 40, 25, 10]",
        )
        seventh = k.submit_action("bot", "mutate", "workspace/docs/a.md", {},
                                  envelope=env.id)
        c.expect(
            seventh.status == OutcomeStatus.INSUFFICIENT_ENERGY,
            f"seventh mutate: expected insufficient energy, got {seventh.status.value}",
        )
        c.expect(
            k.get_envelope_doc(env.id)["available"] == 10,
            "balance changed on a failed reservation",
        )
        # commitment settlement on reject
        env2 = k.issue_envelope("alice", "bot", 1000, ["workspace/**"], ["mutate"],
                                hold_on=[("workspace/danger/**", "mutate")])
        hold_out = k.submit_action("bot", "mutate", "workspace/danger/x", {},
                                   envelope=env2.id)
        c.expect(hold_out.status == OutcomeStatus.HOLD_TRIGGERED, "hold did not trigger")
        c.expect(k.get_envelope_doc(env2.id)["available"] == 985, "reservation not held")
        k.respond_hold("alice", hold_out.hold_id, "reject")
        after = k.get_envelope_doc(env2.id)["available"]
        c.expect(after == 997, f"commitment settlement left {after}, expected 997")
        c.expect(no_negative(), "negative balance after commitment settlement")
        k.close()
        return f"trace {trace} then InsufficientEnergy; reject settled to 997"

    return _scenario(
        "INV-5 (Energy Conservation)",
        "balance 100->10 then InsufficientEnergy; hold reject settles 1000->997",
        body,
    )


def run_invariants() -> List[ScenarioResult]:
    return [
        scenario_inv1(),
        scenario_inv2(),
        scenario_inv3(),
        scenario_inv4(),
        scenario_inv5(),
    ]


# -- benchmarks --------------------------------------------------------------------

def _bench_kernel(tmp: Path, name: str) -> Kernel:
    config = KernelConfig(
        capacity=CapacityConfig(lambda_per_sec=10**9, tick_interval_ms=1000),
        costs=CostTable(),
    )
    k = Kernel.init(str(tmp / name), config=config)
    k.tick(now=k.clock() + 2_000_000_000)
    return k


def _percentiles(samples_us: List[float]) -> Dict[str, float]:
    ordered = sorted(samples_us)
    return {
        "median_us": round(statistics.median(ordered), 1),
        "p95_us": round(ordered[min(len(ordered) - 1, int(len(ordered) * 0.95))], 1),
        "min_us": round(ordered[0], 1),
        "max_us": round(ordered[-1], 1),
    }


def _payload_for(type_: str) -> Any:
    return dict(EXEC_PAYLOAD) if type_ == "execute" else {"note": "bench"}


def bench_latency(iterations: int = 200, warmup: int = 20) -> Dict[str, Any]:
    """End-to-end submit latency per action type; the first `warmup`
    iterations are discarded."""
    report: Dict[str, Any] = {
        "scenario": "pipeline-latency",
        "iterations": iterations,
        "warmup_discarded": warmup,
        "types": {},
    }
    for type_ in ("observe", "create", "mutate", "execute"):
        with tempfile.TemporaryDirectory(prefix="guardlog-bench-") as tmp:
            k = _bench_kernel(Path(tmp), type_)
            samples = []
            for i in range(iterations):
                payload = _payload_for(type_)
                started = time.perf_counter_ns()
                outcome = k.submit_action("root", type_, f"workspace/bench-{i}", payload)
                elapsed = (time.perf_counter_ns() - started) / 1000.0
                if outcome.status != OutcomeStatus.COMMITTED:
                    raise RuntimeError(f"bench action failed: {outcome}")
                samples.append(elapsed)
            k.close()
        report["types"][type_] = _percentiles(samples[warmup:])
    return report


def bench_throughput(window_secs: float = 5.0) -> Dict[str, Any]:
    """Sequential single-committer throughput over a fixed window."""
    report: Dict[str, Any] = {
        "scenario": "throughput",
        "window_secs": window_secs,
        "results": {},
    }
    mixed_cycle = ("observe", "create", "mutate", "execute")
    for name in ("observe", "create", "mutate", "execute", "mixed"):
        with tempfile.TemporaryDirectory(prefix="guardlog-bench-") as tmp:
            k = _bench_kernel(Path(tmp), name)
            count = 0
            deadline = time.perf_counter() + window_secs
            while time.perf_counter() < deadline:
                type_ = mixed_cycle[count % 4] if name == "mixed" else name
                k.submit_action("root", type_, f"workspace/t-{count}", _payload_for(type_))
                count += 1
            k.close()
        report["results"][name] = {
            "actions_per_sec": round(count / window_secs, 1),
            "total": count,
        }
    return report


def bench_proof_scaling(sizes: Optional[List[int]] = None) -> Dict[str, Any]:
    """Inclusion-proof scaling on the tree layer: exact max path lengths and
    byte sizes per log size; generation time is informational."""
    from .tlog import MemoryNodeStore, MerkleLog, leaf_hash

    sizes = sizes or [10, 50, 100, 500, 1000, 10000]
    log = MerkleLog(MemoryNodeStore())
    results = []
    appended = 0
    for size in sorted(sizes):
        while appended < size:
            log.append(leaf_hash(appended.to_bytes(8, "big")))
            appended += 1
        stride = max(1, size // 128)
        timings = []
        max_hashes = 0
        for index in range(size):
            if index % stride == 0:
                started = time.perf_counter_ns()
                proof = log.prove_inclusion(index, size)
                timings.append((time.perf_counter_ns() - started) / 1000.0)
            else:
                proof = log.prove_inclusion(index, size)
            max_hashes = max(max_hashes, len(proof.path))
        results.append(
            {
                "log_size": size,
                "max_hashes": max_hashes,
                "proof_bytes": max_hashes * 32,
                "median_generation_us": round(statistics.median(timings), 1),
            }
        )
    return {"scenario": "merkle-proof-scaling", "results": results}


def bench_hold(samples: int = 8) -> Dict[str, Any]:
    """Mechanical hold-workflow latency: trigger, read pending, approve,
    reject (human decision time excluded)."""
    phases: Dict[str, List[float]] = {"trigger": [], "read_pending": [],
                                      "approve": [], "reject": []}
    with tempfile.TemporaryDirectory(prefix="guardlog-bench-") as tmp:
        k = _bench_kernel(Path(tmp), "hold")
        k.register_actor("root", "alice", ActorKind.HUMAN,
                         writable=[("workspace/**", "*")])
        k.register_actor("alice", "bot", ActorKind.AGENT, purpose="bench",
                         writable=[("workspace/**", "mutate")])
        k.tick(now=k.clock() + 10_000_000_000)
        env = k.issue_envelope("alice", "bot", 10**6, ["workspace/**"], ["mutate"],
                               hold_on=[("workspace/danger/**", "mutate")])
        for i in range(samples):
            for decision in ("approve", "reject"):
                started = time.perf_counter_ns()
                out = k.submit_action("bot", "mutate", f"workspace/danger/{decision}-{i}",
                                      {}, envelope=env.id)
                phases["trigger"].append((time.perf_counter_ns() - started) / 1000.0)
                started = time.perf_counter_ns()
                k.list_pending_holds()
                phases["read_pending"].append((time.perf_counter_ns() - started) / 1000.0)
                started = time.perf_counter_ns()
                k.respond_hold("alice", out.hold_id, decision)
                phases[decision].append((time.perf_counter_ns() - started) / 1000.0)
        k.close()
    return {
        "scenario": "hold-workflow",
        "samples": samples,
        "phases": {
            name: {
                "median_us": round(statistics.median(values), 1),
                "max_us": round(max(values), 1),
            }
            for name, values in phases.items()
        },
    }
