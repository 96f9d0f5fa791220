"""Submit pipeline: outcomes, event accounting, boundary wiring, payload
validation, replay guards, determinism."""

import pytest

from conftest import make_kernel
from guardlog import ActionType, ActorKind, OutcomeStatus
from guardlog.errors import (
    DuplicateActor,
    NotFound,
    PayloadError,
    PolicyViolation,
)
from guardlog.model import payload_hash
from guardlog.tlog import verify_inclusion

OID = "sha256:" + "ab" * 32


def log_len(kernel):
    return kernel.store.event_count()


# -- registration ------------------------------------------------------------

def test_bootstrap_creates_root_with_empty_log(kernel):
    actors = kernel.list_actors()
    assert [a["id"] for a in actors] == ["root"]
    # root exists ab initio; a fresh kernel's log is empty with a null root
    assert kernel.read_events() == []
    assert kernel.tree.size == 0
    assert kernel.tree.root() is None
    assert kernel.status()["root"] == "null"


def test_register_agent_by_human(kernel):
    kernel.register_actor("root", "alice", ActorKind.HUMAN, writable=[("workspace/**", "*")])
    actor = kernel.register_actor(
        "alice", "bot1", ActorKind.AGENT, purpose="docs assistant",
        writable=[("workspace/docs/*", "mutate")],
    )
    assert actor.kind == ActorKind.AGENT
    assert actor.creator == "alice"
    assert actor.purpose == "docs assistant"
    events = kernel.read_events(target_prefix="system/actors")
    assert events[-1].target == "system/actors/bot1"


def test_agent_cannot_create_agent(kernel):
    kernel.register_actor("root", "alice", ActorKind.HUMAN)
    kernel.register_actor("alice", "bot1", ActorKind.AGENT, purpose="p")
    with pytest.raises(PolicyViolation):
        kernel.register_actor("bot1", "bot2", ActorKind.AGENT, purpose="p")


def test_duplicate_actor_rejected(kernel):
    kernel.register_actor("root", "alice", ActorKind.HUMAN)
    with pytest.raises(DuplicateActor):
        kernel.register_actor("root", "alice", ActorKind.HUMAN)


def test_agent_requires_purpose(kernel):
    kernel.register_actor("root", "alice", ActorKind.HUMAN)
    with pytest.raises(PolicyViolation):
        kernel.register_actor("alice", "bot1", ActorKind.AGENT)


def test_humans_registered_only_by_root(kernel):
    kernel.register_actor("root", "alice", ActorKind.HUMAN)
    with pytest.raises(PolicyViolation):
        kernel.register_actor("alice", "bob", ActorKind.HUMAN)


def test_humans_never_expire(kernel):
    with pytest.raises(PolicyViolation):
        kernel.register_actor("root", "alice", ActorKind.HUMAN, expiry=123)


# -- submit outcomes ------------------------------------------------------------

def test_in_bounds_mutate_commits(funded_kernel):
    k = funded_kernel
    before = log_len(k)
    outcome = k.submit_action("bot1", "mutate", "workspace/docs/a.md", {"v": 1})
    assert outcome.status == OutcomeStatus.COMMITTED
    assert outcome.receipt.log_index == before + 1
    assert log_len(k) == before + 1
    event = k.store.get_event(outcome.receipt.log_index)
    assert event.event_hash == outcome.receipt.event_hash
    assert event.reserved_energy == event.settled_energy == 15


def test_out_of_bounds_rejected_no_log_entry(funded_kernel):
    k = funded_kernel
    before = log_len(k)
    outcome = k.submit_action("bot1", "mutate", "workspace/code/x.rs", {})
    assert outcome.status == OutcomeStatus.REJECTED
    assert log_len(k) == before


def test_unknown_actor_rejected(funded_kernel):
    outcome = funded_kernel.submit_action("ghost", "mutate", "workspace/docs/a", {})
    assert outcome.status == OutcomeStatus.REJECTED


def test_bad_target_rejected(funded_kernel):
    outcome = funded_kernel.submit_action("bot1", "mutate", "Workspace/Docs", {})
    assert outcome.status == OutcomeStatus.REJECTED


def test_observe_costs_nothing_and_commits(funded_kernel):
    k = funded_kernel
    available_before, _ = k.store.get_balance("bot1")
    outcome = k.submit_action("bot1", "observe", "workspace/code/whatever", {})
    assert outcome.status == OutcomeStatus.COMMITTED
    assert k.store.get_balance("bot1")[0] == available_before


def test_insufficient_energy_leaves_log_and_balance(funded_kernel):
    k = funded_kernel
    k.store.set_balance("bot1", 5, 0)
    before = log_len(k)
    outcome = k.submit_action("bot1", "mutate", "workspace/docs/a.md", {})
    assert outcome.status == OutcomeStatus.INSUFFICIENT_ENERGY
    assert log_len(k) == before
    assert k.store.get_balance("bot1") == (5, 0)


def test_root_can_mutate_system(funded_kernel):
    outcome = funded_kernel.submit_action("root", "mutate", "system/config", {"k": "v"})
    assert outcome.status == OutcomeStatus.COMMITTED


def test_balance_deducted_on_commit(funded_kernel):
    k = funded_kernel
    available_before, _ = k.store.get_balance("bot1")
    k.submit_action("bot1", "mutate", "workspace/docs/a.md", {})
    assert k.store.get_balance("bot1")[0] == available_before - 15


def test_inclusion_proof_verifies_after_append(funded_kernel):
    k = funded_kernel
    outcome = k.submit_action("bot1", "mutate", "workspace/docs/a.md", {"v": 9})
    seq = outcome.receipt.log_index
    proof = k.prove_inclusion(seq)
    root = k.tree.root()
    assert verify_inclusion(root, k.tree.size, seq - 1, outcome.receipt.event_hash, proof)


# -- execute payload validation ---------------------------------------------------

def exec_payload(**overrides):
    payload = {
        "input_oid": OID,
        "output_oid": OID,
        "exit_code": 0,
        "artifact_hash": "sha256:" + "cd" * 32,
    }
    payload.update(overrides)
    return payload


def test_execute_payload_accepted(funded_kernel):
    k = funded_kernel
    k.register_actor("alice", "runner", ActorKind.AGENT, purpose="exec",
                     writable=[("workspace/**", "execute")])
    k.clock.advance(2_000_000_000)
    k.tick()
    outcome = k.submit_action("runner", "execute", "workspace/run", exec_payload())
    assert outcome.status == OutcomeStatus.COMMITTED
    event = k.store.get_event(outcome.receipt.log_index)
    assert event.artifact_hash == bytes.fromhex("cd" * 32)


def test_execute_missing_exit_code(funded_kernel):
    k = funded_kernel
    k.register_actor("alice", "runner", ActorKind.AGENT, purpose="exec",
                     writable=[("workspace/**", "execute")])
    k.clock.advance(2_000_000_000)
    k.tick()
    payload = exec_payload()
    del payload["exit_code"]
    before = log_len(k)
    balance_before = k.store.get_balance("runner")
    with pytest.raises(PayloadError, match="exit_code"):
        k.submit_action("runner", "execute", "workspace/run", payload)
    assert log_len(k) == before
    assert k.store.get_balance("runner") == balance_before  # reservation released


def test_execute_malformed_oid(funded_kernel):
    k = funded_kernel
    k.register_actor("alice", "runner", ActorKind.AGENT, purpose="exec",
                     writable=[("workspace/**", "execute")])
    k.clock.advance(2_000_000_000)
    k.tick()
    with pytest.raises(PayloadError, match="input_oid"):
        k.submit_action("runner", "execute", "workspace/run",
                        exec_payload(input_oid="sha256:XYZ"))


def test_execute_output_bytes_priced(funded_kernel):
    k = funded_kernel
    k.register_actor("alice", "runner", ActorKind.AGENT, purpose="exec",
                     writable=[("workspace/**", "execute")])
    k.clock.advance(2_000_000_000)
    k.tick()
    before = k.store.get_balance("runner")[0]
    outcome = k.submit_action("runner", "execute", "workspace/run",
                              exec_payload(output_bytes=512))
    assert outcome.status == OutcomeStatus.COMMITTED
    assert k.store.get_balance("runner")[0] == before - 27
    event = k.store.get_event(outcome.receipt.log_index)
    assert event.settled_energy == 27


def test_mutate_content_oid_checked(funded_kernel):
    with pytest.raises(PayloadError, match="content_oid"):
        funded_kernel.submit_action("bot1", "mutate", "workspace/docs/a.md",
                                    {"content_oid": "sha256:short"})
    outcome = funded_kernel.submit_action("bot1", "mutate", "workspace/docs/a.md",
                                          {"content_oid": OID})
    assert outcome.status == OutcomeStatus.COMMITTED


def test_float_payload_rejected(funded_kernel):
    with pytest.raises(PayloadError):
        funded_kernel.submit_action("bot1", "mutate", "workspace/docs/a.md", {"x": 1.5})


def test_oversized_payload_rejected(tmp_path):
    k = make_kernel(tmp_path, max_payload_bytes=100)
    k.register_actor("root", "alice", ActorKind.HUMAN, writable=[("workspace/**", "*")])
    k.clock.advance(2_000_000_000)
    k.tick()
    with pytest.raises(PayloadError, match="exceeds limit"):
        k.submit_action("alice", "mutate", "workspace/a", {"blob": "x" * 200})
    k.close()


def test_reserved_markers_rejected_externally(funded_kernel):
    k = funded_kernel
    for marker in ("_hold_approved", "_hold_reserved_cost"):
        outcome = k.submit_action("bot1", "mutate", "workspace/docs/a.md", {marker: True})
        assert outcome.status == OutcomeStatus.REJECTED
        assert "reserved payload key" in outcome.reason


# -- event field semantics ----------------------------------------------------------

def test_event_fields_and_payload_hash(funded_kernel):
    k = funded_kernel
    payload = {"body": "hello", "n": 3}
    outcome = k.submit_action("bot1", "mutate", "workspace/docs/a.md", payload)
    event = k.store.get_event(outcome.receipt.log_index)
    assert event.actor == "bot1"
    assert event.type == ActionType.MUTATE
    assert event.payload == payload
    assert event.payload_hash == payload_hash(payload)
    assert event.artifact_hash is None


def test_timestamps_never_regress(funded_kernel):
    k = funded_kernel
    k.submit_action("bot1", "mutate", "workspace/docs/a.md", {}, timestamp=10_000)
    last = k.read_events()[-1]
    assert last.timestamp >= k.read_events()[-2].timestamp


def test_agent_expiry_lazy_rejection(tmp_path):
    k = make_kernel(tmp_path)
    k.register_actor("root", "alice", ActorKind.HUMAN, writable=[("workspace/**", "*")])
    expiry = k.clock.now_ns + 1_000_000_000
    k.register_actor("alice", "shortlived", ActorKind.AGENT, purpose="p",
                     writable=[("workspace/**", "mutate")], expiry=expiry)
    k.clock.advance(2_000_000_000)
    k.tick()
    outcome = k.submit_action("shortlived", "mutate", "workspace/a", {})
    assert outcome.status == OutcomeStatus.REJECTED
    assert k.store.get_actor("shortlived")["status"] == "expired"
    k.close()


def test_determinism_identical_sessions(tmp_path):
    def run(name):
        k = make_kernel(tmp_path, name=name)
        k.register_actor("root", "alice", ActorKind.HUMAN, writable=[("workspace/**", "*")])
        k.register_actor("alice", "bot1", ActorKind.AGENT, purpose="p",
                         writable=[("workspace/**", "mutate")])
        k.clock.advance(2_000_000_000)
        k.tick()
        for i in range(5):
            k.submit_action("bot1", "mutate", f"workspace/f{i}", {"i": i})
        events = [e.to_doc() for e in k.read_events()]
        root = k.tree.root()
        k.close()
        return events, root

    events_a, root_a = run("a")
    events_b, root_b = run("b")
    assert events_a == events_b
    assert root_a == root_b


def test_reopen_preserves_root_and_length(tmp_path):
    from guardlog import FixedClock, Kernel, seeded_id_gen

    k = make_kernel(tmp_path)
    k.register_actor("root", "alice", ActorKind.HUMAN, writable=[("workspace/**", "*")])
    k.clock.advance(2_000_000_000)
    k.tick()
    k.submit_action("alice", "mutate", "workspace/a", {})
    root = k.tree.root()
    size = k.tree.size
    k.close()
    k2 = Kernel(str(tmp_path / "k"), clock=FixedClock(), id_gen=seeded_id_gen(8))
    assert k2.tree.size == size
    assert k2.tree.root() == root
    k2.close()


def test_prefix_property_snapshots(funded_kernel):
    k = funded_kernel
    hashes = []
    snapshots = []
    for i in range(8):
        k.submit_action("bot1", "mutate", "workspace/docs/a.md", {"i": i})
        hashes = [e.event_hash for e in k.read_events()]
        snapshots.append(list(hashes))
    for snap in snapshots:
        assert hashes[: len(snap)] == snap
