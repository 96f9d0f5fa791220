"""Audit packages and the independent verifier."""

import ast
import json

import pytest

from conftest import make_kernel
from guardlog import ActorKind
from guardlog.audit import export_package, export_package_tar, publish_checkpoint
from guardlog.checkpoint import format_checkpoint, parse_checkpoint
from guardlog.errors import NotFound
from guardlog import verifier


@pytest.fixture
def k(tmp_path):
    kernel = make_kernel(tmp_path)
    kernel.register_actor("root", "alice", ActorKind.HUMAN,
                          writable=[("workspace/**", "*")])
    kernel.clock.advance(2_000_000_000)
    kernel.tick()
    yield kernel
    kernel.close()


def commit_n(k, n, prefix="workspace/f"):
    for i in range(n):
        k.submit_action("alice", "mutate", f"{prefix}{i}", {"i": i})


def pubkey(k):
    return k.public_key_bytes()


def test_export_and_verify_full_log(k, tmp_path):
    commit_n(k, 10)
    pkg = export_package(k, str(tmp_path / "pkg"))
    report = verifier.verify_package(str(pkg), pubkey(k))
    assert report["checkpoint"]["ok"]
    assert len(report["events"]) == k.store.event_count()
    assert all(e["ok"] for e in report["events"])
    assert report["overall"]


def test_export_subrange_proofs_at_current_size(k, tmp_path):
    commit_n(k, 12)
    total = k.store.event_count()
    pkg = export_package(k, str(tmp_path / "pkg"), seq_from=3, seq_to=5)
    proofs = json.loads((pkg / "proofs.json").read_text())
    assert len(proofs) == 3
    assert all(p["tree_size"] == total for p in proofs)
    report = verifier.verify_package(str(pkg), pubkey(k))
    assert report["overall"]
    assert [e["seq"] for e in report["events"]] == [3, 4, 5]


def test_tampered_payload_flagged(k, tmp_path):
    commit_n(k, 10)
    pkg = export_package(k, str(tmp_path / "pkg"))
    lines = (pkg / "events.jsonl").read_bytes().splitlines()
    doc = json.loads(lines[4])
    doc["payload"]["i"] = 999  # flip one payload value
    lines[4] = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    (pkg / "events.jsonl").write_bytes(b"\n".join(lines) + b"\n")
    report = verifier.verify_package(str(pkg), pubkey(k))
    assert not report["overall"]
    flagged = [e for e in report["events"] if not e["ok"]]
    assert len(flagged) == 1
    assert flagged[0]["seq"] == json.loads(lines[4])["seq"]
    assert "payload_hash mismatch" in flagged[0]["reason"]


def test_tampered_event_field_fails_inclusion(k, tmp_path):
    commit_n(k, 6)
    pkg = export_package(k, str(tmp_path / "pkg"))
    lines = (pkg / "events.jsonl").read_bytes().splitlines()
    doc = json.loads(lines[2])
    doc["actor"] = "mallory"  # consistent re-hash, wrong history
    from guardlog.model import payload_hash as ph
    from guardlog.canonical import canonical_encode
    import hashlib
    body = canonical_encode([
        doc["id"], doc["seq"], doc["actor"], doc["type"], doc["target"],
        doc["payload"], doc["payload_hash"], doc["timestamp"],
        doc.get("artifact_hash"), doc["reserved_energy"], doc["settled_energy"],
    ])
    doc["event_hash"] = hashlib.sha256(b"\x00" + body).hexdigest()
    lines[2] = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    (pkg / "events.jsonl").write_bytes(b"\n".join(lines) + b"\n")
    report = verifier.verify_package(str(pkg), pubkey(k))
    flagged = [e for e in report["events"] if not e["ok"]]
    assert len(flagged) == 1
    assert "inclusion proof failed" in flagged[0]["reason"]


def test_forged_checkpoint_signature_fails(k, tmp_path):
    commit_n(k, 4)
    pkg = export_package(k, str(tmp_path / "pkg"))
    from cryptography.hazmat.primitives.asymmetric import ed25519

    attacker = ed25519.Ed25519PrivateKey.generate()
    from guardlog.checkpoint import sign_checkpoint

    honest = parse_checkpoint((pkg / "checkpoint").read_bytes())
    forged = sign_checkpoint(honest.origin, honest.tree_size, honest.root,
                             honest.signatures[0][0], attacker)
    (pkg / "checkpoint").write_bytes(format_checkpoint(forged))
    report = verifier.verify_package(str(pkg), pubkey(k))
    assert not report["checkpoint"]["ok"]
    assert not report["overall"]


def test_prior_checkpoint_and_consistency(k, tmp_path):
    commit_n(k, 10)
    publish_checkpoint(k)
    commit_n(k, 5, prefix="workspace/g")
    pkg = export_package(k, str(tmp_path / "pkg"))
    assert (pkg / "prior_checkpoint").exists()
    assert (pkg / "consistency.json").exists()
    cons = json.loads((pkg / "consistency.json").read_text())
    assert cons["new_size"] - cons["old_size"] == 5
    report = verifier.verify_package(str(pkg), pubkey(k))
    assert report["consistency"]["ok"]
    assert report["overall"]


def test_empty_range_errors(k, tmp_path):
    with pytest.raises(NotFound):
        export_package(k, str(tmp_path / "pkg"), seq_from=100, seq_to=200)


def test_publish_checkpoint_idempotent_and_monotone(k):
    commit_n(k, 3)
    a = publish_checkpoint(k)
    b = publish_checkpoint(k)
    assert format_checkpoint(a) == format_checkpoint(b)
    commit_n(k, 1)
    c = publish_checkpoint(k)
    assert c.tree_size == a.tree_size + 1
    sizes = [a.tree_size, b.tree_size, c.tree_size]
    assert sizes == sorted(sizes)


def test_checkpoint_root_matches_tree(k):
    commit_n(k, 5)
    cp = publish_checkpoint(k)
    assert cp.root == k.tree.root()
    assert cp.tree_size == k.tree.size
    assert cp.origin == k.config.origin


def test_export_tar_contains_package(k, tmp_path):
    import io
    import tarfile

    commit_n(k, 3)
    blob = export_package_tar(k)
    with tarfile.open(fileobj=io.BytesIO(blob)) as tar:
        names = sorted(tar.getnames())
    assert "events.jsonl" in names
    assert "proofs.json" in names
    assert "checkpoint" in names


def test_verifier_module_is_independent():
    """The verifier must not import any kernel module."""
    import guardlog.verifier as v

    tree = ast.parse(open(v.__file__).read())
    banned = {"guardlog"}
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                assert alias.name.split(".")[0] not in banned
        elif isinstance(node, ast.ImportFrom):
            assert node.level == 0, "relative import found in verifier"
            assert (node.module or "").split(".")[0] not in banned


def test_verifier_cli_exit_codes(k, tmp_path, capsys):
    commit_n(k, 4)
    pkg = export_package(k, str(tmp_path / "pkg"))
    key_path = tmp_path / "k" / "keys" / "checkpoint.pub"
    assert verifier.main([str(pkg), "--key", str(key_path)]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out
    # tamper and expect failure naming the event
    lines = (pkg / "events.jsonl").read_bytes().splitlines()
    doc = json.loads(lines[1])
    doc["payload"] = {"forged": True}
    lines[1] = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    (pkg / "events.jsonl").write_bytes(b"\n".join(lines) + b"\n")
    assert verifier.main([str(pkg), "--key", str(key_path)]) == 1
    out = capsys.readouterr().out
    assert f"event seq={doc['seq']}: FAIL" in out
    assert "overall: FAIL" in out
