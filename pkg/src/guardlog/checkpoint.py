"""Signed tree-head notes anchoring the log for external verifiers.

Note layout (bit-exact):

    <origin>\n
    <tree size, decimal>\n
    <standard base64 of the 32-byte root digest, or the literal "null" for an
     empty tree>\n
    \n
    — <signer-name> <base64(4-byte key hint || 64-byte Ed25519 sig)>\n

The signature covers the three body lines including their newlines. The key
hint is the first 4 bytes of SHA-256 over the raw 32-byte public key.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

from .errors import FormatError

SIG_PREFIX = "— "  # em dash + space, one per signature line
NULL_ROOT = "null"


@dataclass(frozen=True)
class Checkpoint:
    origin: str
    tree_size: int
    root: Optional[bytes]  # None for the empty tree
    signatures: Tuple[Tuple[str, bytes], ...]  # (signer name, hint||sig blob)

    def body(self) -> bytes:
        root_line = NULL_ROOT if self.root is None else base64.b64encode(self.root).decode("ascii")
        return f"{self.origin}\n{self.tree_size}\n{root_line}\n".encode("utf-8")


def key_hint(public_key_bytes: bytes) -> bytes:
    return hashlib.sha256(public_key_bytes).digest()[:4]


def sign_checkpoint(
    origin: str,
    tree_size: int,
    root: Optional[bytes],
    signer_name: str,
    private_key: ed25519.Ed25519PrivateKey,
) -> Checkpoint:
    unsigned = Checkpoint(origin, tree_size, root, ())
    pub = public_key_bytes(private_key.public_key())
    sig = private_key.sign(unsigned.body())
    blob = key_hint(pub) + sig
    return Checkpoint(origin, tree_size, root, ((signer_name, blob),))


def public_key_bytes(public_key: ed25519.Ed25519PublicKey) -> bytes:
    from cryptography.hazmat.primitives import serialization

    return public_key.public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


def format_checkpoint(c: Checkpoint) -> bytes:
    if not c.signatures:
        raise FormatError("checkpoint must carry at least one signature")
    lines = [c.body().decode("utf-8"), "\n"]
    for name, blob in c.signatures:
        lines.append(f"{SIG_PREFIX}{name} {base64.b64encode(blob).decode('ascii')}\n")
    return "".join(lines).encode("utf-8")


def parse_checkpoint(data: bytes) -> Checkpoint:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"checkpoint is not UTF-8: {exc}") from None
    if "\n\n" not in text:
        raise FormatError("checkpoint note missing blank separator line")
    body, _, sig_section = text.partition("\n\n")
    body_lines = body.split("\n")
    if len(body_lines) != 3:
        raise FormatError(f"checkpoint body must be 3 lines, got {len(body_lines)}")
    origin, size_line, root_line = body_lines
    if not origin:
        raise FormatError("empty origin line")
    try:
        tree_size = int(size_line, 10)
    except ValueError:
        raise FormatError(f"bad tree size line: {size_line!r}") from None
    if tree_size < 0:
        raise FormatError("negative tree size")
    if root_line == NULL_ROOT:
        root: Optional[bytes] = None
    else:
        try:
            root = base64.b64decode(root_line, validate=True)
        except (binascii.Error, ValueError):
            raise FormatError(f"bad root line: {root_line!r}") from None
        if len(root) != 32:
            raise FormatError("root digest must be 32 bytes")
    if (root is None) != (tree_size == 0):
        raise FormatError("null root permitted exactly for size 0")
    signatures: List[Tuple[str, bytes]] = []
    for line in sig_section.split("\n"):
        if not line:
            continue
        if not line.startswith(SIG_PREFIX):
            raise FormatError(f"bad signature line: {line!r}")
        rest = line[len(SIG_PREFIX):]
        name, sep, sig_b64 = rest.rpartition(" ")
        if not sep or not name:
            raise FormatError(f"bad signature line: {line!r}")
        try:
            blob = base64.b64decode(sig_b64, validate=True)
        except (binascii.Error, ValueError):
            raise FormatError(f"bad signature encoding: {sig_b64!r}") from None
        if len(blob) != 4 + 64:
            raise FormatError("signature blob must be 4-byte hint plus 64-byte signature")
        signatures.append((name, blob))
    if not signatures:
        raise FormatError("checkpoint note carries no signatures")
    return Checkpoint(origin, tree_size, root, tuple(signatures))


def verify_checkpoint(c: Checkpoint, public_key_raw: bytes) -> bool:
    """True iff some signature line verifies under the given 32-byte key."""
    hint = key_hint(public_key_raw)
    key = ed25519.Ed25519PublicKey.from_public_bytes(public_key_raw)
    body = c.body()
    for _, blob in c.signatures:
        if blob[:4] != hint:
            continue
        try:
            key.verify(blob[4:], body)
            return True
        except InvalidSignature:
            continue
    return False
