"""Checkpoint note format: layout, round trip, signatures."""

import base64

import pytest
from cryptography.hazmat.primitives.asymmetric import ed25519

from guardlog.checkpoint import (
    Checkpoint,
    format_checkpoint,
    parse_checkpoint,
    public_key_bytes,
    sign_checkpoint,
    verify_checkpoint,
)
from guardlog.errors import FormatError


@pytest.fixture(scope="module")
def key():
    return ed25519.Ed25519PrivateKey.generate()


@pytest.fixture(scope="module")
def pub(key):
    return public_key_bytes(key.public_key())


def test_note_layout(key, pub):
    root = bytes(range(32))
    cp = sign_checkpoint("example.local/log", 15, root, "example.local/log", key)
    note = format_checkpoint(cp).decode("utf-8")
    lines = note.split("\n")
    assert lines[0] == "example.local/log"
    assert lines[1] == "15"
    assert lines[2] == base64.b64encode(root).decode()
    assert lines[3] == ""
    assert lines[4].startswith("— example.local/log ")
    assert note.endswith("\n")
    # signature blob = 4-byte hint + 64-byte signature
    blob = base64.b64decode(lines[4].split(" ")[2])
    assert len(blob) == 68


def test_round_trip(key):
    cp = sign_checkpoint("origin/x", 3, b"\x42" * 32, "signer", key)
    assert parse_checkpoint(format_checkpoint(cp)) == cp


def test_signature_verifies_and_detects_tamper(key, pub):
    cp = sign_checkpoint("origin/x", 7, b"\x07" * 32, "signer", key)
    note = format_checkpoint(cp)
    assert verify_checkpoint(parse_checkpoint(note), pub)
    tampered = note.replace(b"\n7\n", b"\n8\n")
    parsed = parse_checkpoint(tampered)
    assert not verify_checkpoint(parsed, pub)


def test_wrong_key_fails(key):
    other = ed25519.Ed25519PrivateKey.generate()
    cp = sign_checkpoint("origin/x", 1, b"\x01" * 32, "signer", key)
    assert not verify_checkpoint(cp, public_key_bytes(other.public_key()))


def test_size_zero_null_root(key, pub):
    cp = sign_checkpoint("origin/x", 0, None, "signer", key)
    note = format_checkpoint(cp)
    assert b"\nnull\n" in note
    parsed = parse_checkpoint(note)
    assert parsed.root is None
    assert verify_checkpoint(parsed, pub)


def test_parse_rejects_malformed(key):
    cp = sign_checkpoint("origin/x", 2, b"\x02" * 32, "signer", key)
    note = format_checkpoint(cp)
    with pytest.raises(FormatError):
        parse_checkpoint(note.replace(b"\n\n", b"\n"))  # no separator
    with pytest.raises(FormatError):
        parse_checkpoint("origin\nnot-a-number\nnull\n\n— a b\n".encode("utf-8"))
    with pytest.raises(FormatError):
        parse_checkpoint(cp.body() + b"\n")  # unsigned

    unsigned = Checkpoint("o", 1, b"\x01" * 32, ())
    with pytest.raises(FormatError):
        format_checkpoint(unsigned)


def test_null_root_only_for_size_zero(key):
    note = (
        "origin\n3\nnull\n\n— signer ".encode("utf-8")
        + base64.b64encode(b"\x00" * 68)
        + b"\n"
    )
    with pytest.raises(FormatError):
        parse_checkpoint(note)


def test_deterministic_signatures(key):
    a = sign_checkpoint("o/l", 5, b"\x05" * 32, "s", key)
    b = sign_checkpoint("o/l", 5, b"\x05" * 32, "s", key)
    assert format_checkpoint(a) == format_checkpoint(b)
