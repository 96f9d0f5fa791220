"""Brute-force RFC 6962 reference: recursive MTH/PATH/PROOF over full leaf
lists. Used as the independent oracle for the incremental tree; keep it free
of any guardlog imports."""

import hashlib
from typing import List


def _leaf(data: bytes) -> bytes:
    return hashlib.sha256(b"\x00" + data).digest()


def _node(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


def _split(n: int) -> int:
    k = 1
    while k * 2 < n:
        k *= 2
    return k


def mth(leaves: List[bytes]) -> bytes:
    """Merkle tree head over raw leaf data (not pre-hashed)."""
    n = len(leaves)
    if n == 0:
        return hashlib.sha256(b"").digest()
    if n == 1:
        return _leaf(leaves[0])
    k = _split(n)
    return _node(mth(leaves[:k]), mth(leaves[k:]))


def path(m: int, leaves: List[bytes]) -> List[bytes]:
    """Inclusion path for 0-based leaf m."""
    n = len(leaves)
    if n == 1:
        return []
    k = _split(n)
    if m < k:
        return path(m, leaves[:k]) + [mth(leaves[k:])]
    return path(m - k, leaves[k:]) + [mth(leaves[:k])]


def proof(m: int, leaves: List[bytes]) -> List[bytes]:
    """Consistency proof from size m to len(leaves)."""
    return _subproof(m, leaves, True)


def _subproof(m: int, leaves: List[bytes], complete: bool) -> List[bytes]:
    n = len(leaves)
    if m == n:
        return [] if complete else [mth(leaves)]
    k = _split(n)
    if m <= k:
        return _subproof(m, leaves[:k], complete) + [mth(leaves[k:])]
    return _subproof(m - k, leaves[k:], False) + [mth(leaves[:k])]
