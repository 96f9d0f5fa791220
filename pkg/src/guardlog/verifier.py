"""Standalone audit-package verifier.

This module is the independent half of the dual-route design: it re-implements
canonical JSON encoding, event hashing, RFC 6962 proof verification, and
checkpoint-note parsing from scratch, importing nothing from the rest of the
package (stdlib plus the Ed25519 primitive only). It never trusts an embedded
hash: every leaf is re-derived from the event bytes themselves.

Run as `guardlog-verify <package-dir> --key <pubkey file>` or via
`python -m guardlog.verifier`.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import sys
import unicodedata
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

# -- canonical JSON (independent re-implementation) ---------------------------

_ESCAPES = {'"': '\\"', "\\": "\\\\", "\b": "\\b", "\f": "\\f",
            "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _enc_str(s: str, out: List[str]) -> None:
    out.append('"')
    for ch in unicodedata.normalize("NFC", s):
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ch < "\x20":
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')


def _enc(value: Any, out: List[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        _enc_str(value, out)
    elif isinstance(value, list):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _enc(item, out)
        out.append("]")
    elif isinstance(value, dict):
        items = sorted(
            ((unicodedata.normalize("NFC", k), v) for k, v in value.items()),
            key=lambda kv: kv[0].encode("utf-8"),
        )
        out.append("{")
        for i, (k, v) in enumerate(items):
            if i:
                out.append(",")
            _enc_str(k, out)
            out.append(":")
            _enc(v, out)
        out.append("}")
    else:
        raise ValueError(f"unsupported value kind: {type(value).__name__}")


def canonical(doc: Any) -> bytes:
    out: List[str] = []
    _enc(doc, out)
    return "".join(out).encode("utf-8")


# -- hashing -------------------------------------------------------------------

def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leaf_hash_of_event(doc: Dict[str, Any]) -> Tuple[bytes, bytes]:
    """Recompute (payload_hash, event_hash) from the event's raw fields."""
    p_hash = sha256(canonical(doc["payload"]))
    preimage_body = canonical(
        [
            doc["id"],
            doc["seq"],
            doc["actor"],
            doc["type"],
            doc["target"],
            doc["payload"],
            p_hash.hex(),
            doc["timestamp"],
            doc.get("artifact_hash"),
            doc["reserved_energy"],
            doc["settled_energy"],
        ]
    )
    return p_hash, sha256(b"\x00" + preimage_body)


def _node(left: bytes, right: bytes) -> bytes:
    return sha256(b"\x01" + left + right)


# -- RFC 6962 proof verification (iterative algorithms) --------------------------

def verify_inclusion_path(
    root: bytes, tree_size: int, leaf_index: int, leaf: bytes, path: List[bytes]
) -> bool:
    if tree_size < 1 or not 0 <= leaf_index < tree_size or len(leaf) != 32:
        return False
    fn, sn = leaf_index, tree_size - 1
    r = leaf
    for p in path:
        if len(p) != 32 or sn == 0:
            return False
        if fn & 1 or fn == sn:
            r = _node(p, r)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            r = _node(r, p)
        fn >>= 1
        sn >>= 1
    return sn == 0 and r == root


def verify_consistency_path(
    old_root: bytes, old_size: int, new_root: bytes, new_size: int, path: List[bytes]
) -> bool:
    if old_size < 1 or new_size < old_size:
        return False
    if old_size == new_size:
        return path == [] and old_root == new_root
    if any(len(p) != 32 for p in path):
        return False
    steps = list(path)
    if old_size & (old_size - 1) == 0:
        steps.insert(0, old_root)
    if not steps:
        return False
    fn, sn = old_size - 1, new_size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = steps[0]
    for c in steps[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = _node(c, fr)
            sr = _node(c, sr)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            sr = _node(sr, c)
        fn >>= 1
        sn >>= 1
    return sn == 0 and fr == old_root and sr == new_root


# -- checkpoint notes --------------------------------------------------------------

class NoteError(ValueError):
    pass


def parse_note(data: bytes) -> Dict[str, Any]:
    text = data.decode("utf-8")
    if "\n\n" not in text:
        raise NoteError("missing blank separator")
    body, _, sig_section = text.partition("\n\n")
    lines = body.split("\n")
    if len(lines) != 3:
        raise NoteError("body must be 3 lines")
    origin, size_line, root_line = lines
    size = int(size_line, 10)
    root = None if root_line == "null" else base64.b64decode(root_line, validate=True)
    if root is not None and len(root) != 32:
        raise NoteError("root must be 32 bytes")
    sigs = []
    for line in sig_section.split("\n"):
        if not line:
            continue
        if not line.startswith("— "):
            raise NoteError(f"bad signature line {line!r}")
        name, _, blob_b64 = line[2:].rpartition(" ")
        blob = base64.b64decode(blob_b64, validate=True)
        if len(blob) != 68:
            raise NoteError("signature blob must be 68 bytes")
        sigs.append((name, blob))
    if not sigs:
        raise NoteError("no signatures")
    return {
        "origin": origin,
        "tree_size": size,
        "root": root,
        "signatures": sigs,
        "body": f"{origin}\n{size_line}\n{root_line}\n".encode("utf-8"),
    }


def verify_note_signature(note: Dict[str, Any], public_key_raw: bytes) -> bool:
    hint = sha256(public_key_raw)[:4]
    key = ed25519.Ed25519PublicKey.from_public_bytes(public_key_raw)
    for _, blob in note["signatures"]:
        if blob[:4] != hint:
            continue
        try:
            key.verify(blob[4:], note["body"])
            return True
        except InvalidSignature:
            continue
    return False


# -- package verification -------------------------------------------------------------

def verify_package(package_dir: str, trusted_key: bytes) -> Dict[str, Any]:
    """Check every event, proof, checkpoint signature, and the optional
    consistency link in an exported audit package. Failures become report
    entries, never exceptions."""
    pkg = Path(package_dir)
    report: Dict[str, Any] = {
        "checkpoint": {"ok": False, "reason": None},
        "events": [],
        "consistency": None,
        "overall": False,
    }
    try:
        note = parse_note((pkg / "checkpoint").read_bytes())
    except (OSError, ValueError) as exc:
        report["checkpoint"]["reason"] = f"unreadable checkpoint: {exc}"
        return report
    sig_ok = verify_note_signature(note, trusted_key)
    report["checkpoint"].update(
        ok=sig_ok,
        reason=None if sig_ok else "signature verification failed",
        origin=note["origin"],
        tree_size=note["tree_size"],
        root=note["root"].hex() if note["root"] else "null",
    )
    try:
        event_lines = (pkg / "events.jsonl").read_bytes().splitlines()
        proofs = json.loads((pkg / "proofs.json").read_text())
    except (OSError, ValueError) as exc:
        report["events"].append({"seq": None, "ok": False, "reason": f"unreadable: {exc}"})
        return report
    if len(proofs) != len(event_lines):
        report["events"].append(
            {
                "seq": None,
                "ok": False,
                "reason": f"{len(event_lines)} events but {len(proofs)} proofs",
            }
        )
        return report
    all_ok = sig_ok
    for line, proof in zip(event_lines, proofs):
        entry: Dict[str, Any] = {"seq": None, "ok": False, "reason": None}
        report["events"].append(entry)
        try:
            doc = json.loads(line.decode("utf-8"))
            entry["seq"] = doc.get("seq")
            p_hash, e_hash = leaf_hash_of_event(doc)
        except (ValueError, KeyError, TypeError) as exc:
            entry["reason"] = f"malformed event: {exc}"
            all_ok = False
            continue
        if p_hash.hex() != doc.get("payload_hash"):
            entry["reason"] = (
                f"payload_hash mismatch (recomputed {p_hash.hex()[:8]}..., "
                f"recorded {str(doc.get('payload_hash'))[:8]}...)"
            )
            all_ok = False
            continue
        if e_hash.hex() != doc.get("event_hash"):
            entry["reason"] = (
                f"event_hash mismatch (recomputed {e_hash.hex()[:8]}..., "
                f"recorded {str(doc.get('event_hash'))[:8]}...)"
            )
            all_ok = False
            continue
        try:
            path = [bytes.fromhex(h) for h in proof["path"]]
            leaf_index = proof["leaf_index"]
            tree_size = proof["tree_size"]
        except (KeyError, ValueError, TypeError) as exc:
            entry["reason"] = f"malformed proof: {exc}"
            all_ok = False
            continue
        if leaf_index != doc["seq"] - 1:
            entry["reason"] = f"proof leaf_index {leaf_index} does not match seq {doc['seq']}"
            all_ok = False
            continue
        if tree_size != note["tree_size"] or note["root"] is None:
            entry["reason"] = "proof tree size does not match checkpoint"
            all_ok = False
            continue
        if not verify_inclusion_path(note["root"], tree_size, leaf_index, e_hash, path):
            entry["reason"] = "inclusion proof failed against checkpoint root"
            all_ok = False
            continue
        entry["ok"] = True
    prior_path = pkg / "prior_checkpoint"
    if prior_path.exists():
        cons: Dict[str, Any] = {"ok": False, "reason": None}
        report["consistency"] = cons
        try:
            prior = parse_note(prior_path.read_bytes())
            cons_doc = json.loads((pkg / "consistency.json").read_text())
            path = [bytes.fromhex(h) for h in cons_doc["path"]]
        except (OSError, ValueError, KeyError) as exc:
            cons["reason"] = f"unreadable consistency data: {exc}"
            all_ok = False
        else:
            if not verify_note_signature(prior, trusted_key):
                cons["reason"] = "prior checkpoint signature failed"
                all_ok = False
            elif (
                cons_doc.get("old_size") != prior["tree_size"]
                or cons_doc.get("new_size") != note["tree_size"]
                or prior["root"] is None
                or note["root"] is None
            ):
                cons["reason"] = "consistency proof sizes do not match checkpoints"
                all_ok = False
            elif not verify_consistency_path(
                prior["root"], prior["tree_size"], note["root"], note["tree_size"], path
            ):
                cons["reason"] = "consistency proof failed"
                all_ok = False
            else:
                cons["ok"] = True
                cons["old_size"] = prior["tree_size"]
                cons["new_size"] = note["tree_size"]
    report["overall"] = all_ok and all(e["ok"] for e in report["events"])
    return report


def load_key(path: str) -> bytes:
    """Raw 32-byte Ed25519 public key, or its 64-char hex form."""
    data = Path(path).read_bytes()
    if len(data) == 32:
        return data
    text = data.decode("ascii").strip()
    key = bytes.fromhex(text)
    if len(key) != 32:
        raise ValueError("public key must be 32 bytes")
    return key


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="guardlog-verify",
        description="Independently verify an exported audit package.",
    )
    parser.add_argument("package", help="package directory (events.jsonl, proofs.json, checkpoint)")
    parser.add_argument("--key", required=True, help="trusted checkpoint public key file (raw or hex)")
    parser.add_argument("--json", action="store_true", help="emit the full report as JSON")
    args = parser.parse_args(argv)
    report = verify_package(args.package, load_key(args.key))
    if args.json:
        json.dump(report, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    else:
        cp = report["checkpoint"]
        print(f"checkpoint: {'ok' if cp['ok'] else 'FAIL'}"
              + (f" ({cp['reason']})" if cp.get("reason") else ""))
        for entry in report["events"]:
            status = "ok" if entry["ok"] else "FAIL"
            line = f"event seq={entry['seq']}: {status}"
            if entry["reason"]:
                line += f" ({entry['reason']})"
            print(line)
        if report["consistency"] is not None:
            cons = report["consistency"]
            line = f"consistency: {'ok' if cons['ok'] else 'FAIL'}"
            if cons.get("reason"):
                line += f" ({cons['reason']})"
            print(line)
        print(f"overall: {'PASS' if report['overall'] else 'FAIL'}")
    return 0 if report["overall"] else 1


if __name__ == "__main__":
    sys.exit(main())
