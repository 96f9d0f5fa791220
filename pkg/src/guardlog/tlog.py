"""RFC 6962-style Merkle tree over event leaf hashes.

Incremental append, historical roots, inclusion proofs, consistency proofs.
Nodes are stored by (level, index) so appends write only the rightmost path
and proof generation loads only the O(log n) nodes it touches; proof content
is the standard RFC 6962 construction either way.

Leaf hashes: H(0x00 || data). Internal nodes: H(0x01 || left || right).
The empty tree's root is a null sentinel (None here, the string "null" in
JSON/checkpoint output).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Tuple

from .errors import NotFound

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
DIGEST_LEN = 32


def leaf_hash(data: bytes) -> bytes:
    return hashlib.sha256(LEAF_PREFIX + data).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    if len(left) != DIGEST_LEN or len(right) != DIGEST_LEN:
        raise ValueError("node_hash requires two 32-byte digests")
    return hashlib.sha256(NODE_PREFIX + left + right).digest()


def _largest_power_of_two_below(n: int) -> int:
    """Largest power of two strictly less than n (n >= 2)."""
    return 1 << (n - 1).bit_length() - 1


class NodeStore(Protocol):
    """Persistence interface for tree nodes, keyed by (level, index).

    Level 0 holds leaf hashes; node (L, i) covers leaves [i*2^L, (i+1)*2^L).
    Only perfect-subtree nodes are ever stored, and never overwritten.
    """

    def get_node(self, level: int, index: int) -> Optional[bytes]: ...

    def put_node(self, level: int, index: int, digest: bytes) -> None: ...


class MemoryNodeStore:
    def __init__(self) -> None:
        self.nodes: Dict[Tuple[int, int], bytes] = {}

    def get_node(self, level: int, index: int) -> Optional[bytes]:
        return self.nodes.get((level, index))

    def put_node(self, level: int, index: int, digest: bytes) -> None:
        self.nodes[(level, index)] = digest


@dataclass(frozen=True)
class InclusionProof:
    leaf_index: int
    tree_size: int
    path: List[bytes]

    def to_doc(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "tree_size": self.tree_size,
            "path": [d.hex() for d in self.path],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "InclusionProof":
        return cls(doc["leaf_index"], doc["tree_size"], [bytes.fromhex(h) for h in doc["path"]])


@dataclass(frozen=True)
class ConsistencyProof:
    old_size: int
    new_size: int
    path: List[bytes]

    def to_doc(self) -> dict:
        return {
            "old_size": self.old_size,
            "new_size": self.new_size,
            "path": [d.hex() for d in self.path],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ConsistencyProof":
        return cls(doc["old_size"], doc["new_size"], [bytes.fromhex(h) for h in doc["path"]])


class MerkleLog:
    """Append-only Merkle tree backed by a NodeStore.

    Mutation happens only inside the committer; reads are pure functions of
    the stored nodes, so historical roots and proofs at any size <= current
    size remain available forever.
    """

    def __init__(self, nodes: NodeStore, size: int = 0) -> None:
        self._nodes = nodes
        self.size = size

    def append(self, leaf: bytes) -> int:
        """Add one leaf hash; returns its 0-based index. Writes only the new
        nodes on the rightmost path."""
        if len(leaf) != DIGEST_LEN:
            raise ValueError("leaf must be a 32-byte digest")
        index = self.size
        self._nodes.put_node(0, index, leaf)
        level, idx = 0, index
        while idx & 1:
            left = self._node(level, idx - 1)
            right = self._node(level, idx)
            self._nodes.put_node(level + 1, idx >> 1, node_hash(left, right))
            idx >>= 1
            level += 1
        self.size = index + 1
        return index

    def root(self) -> Optional[bytes]:
        return self.root_at(self.size)

    def root_at(self, size: int) -> Optional[bytes]:
        """Merkle tree head over the first `size` leaves; None for size 0."""
        if size == 0:
            return None
        if size > self.size:
            raise NotFound(f"tree has {self.size} leaves, no root at size {size}")
        return self._hash_range(0, size)

    def prove_inclusion(self, leaf_index: int, tree_size: Optional[int] = None) -> InclusionProof:
        size = self.size if tree_size is None else tree_size
        if size < 1 or size > self.size:
            raise NotFound(f"no tree of size {size}")
        if not 0 <= leaf_index < size:
            raise NotFound(f"leaf index {leaf_index} out of range for size {size}")
        path = self._inclusion_path(leaf_index, 0, size)
        return InclusionProof(leaf_index, size, path)

    def prove_consistency(self, old_size: int, new_size: Optional[int] = None) -> ConsistencyProof:
        new = self.size if new_size is None else new_size
        if not 1 <= old_size <= new or new > self.size:
            raise NotFound(f"invalid consistency range {old_size}..{new} (size {self.size})")
        path = self._subproof(old_size, 0, new, True)
        return ConsistencyProof(old_size, new, path)

    # -- internal ---------------------------------------------------------

    def _node(self, level: int, index: int) -> bytes:
        digest = self._nodes.get_node(level, index)
        if digest is None:
            raise NotFound(f"missing tree node ({level},{index})")
        return digest

    def _hash_range(self, start: int, end: int) -> bytes:
        """Hash of leaves [start, end). Recursion only ever descends into
        stored perfect subtrees, so it loads O(log n) nodes."""
        n = end - start
        if n == 1:
            return self._node(0, start)
        level = n.bit_length() - 1
        if n == (1 << level) and start % n == 0:
            return self._node(level, start >> level)
        k = _largest_power_of_two_below(n)
        return node_hash(self._hash_range(start, start + k), self._hash_range(start + k, end))

    def _inclusion_path(self, m: int, start: int, end: int) -> List[bytes]:
        n = end - start
        if n == 1:
            return []
        k = _largest_power_of_two_below(n)
        if m < k:
            path = self._inclusion_path(m, start, start + k)
            path.append(self._hash_range(start + k, end))
        else:
            path = self._inclusion_path(m - k, start + k, end)
            path.append(self._hash_range(start, start + k))
        return path

    def _subproof(self, m: int, start: int, end: int, complete: bool) -> List[bytes]:
        n = end - start
        if m == n:
            return [] if complete else [self._hash_range(start, end)]
        k = _largest_power_of_two_below(n)
        if m <= k:
            path = self._subproof(m, start, start + k, complete)
            path.append(self._hash_range(start + k, end))
        else:
            path = self._subproof(m - k, start + k, end, False)
            path.append(self._hash_range(start, start + k))
        return path


def verify_inclusion(
    root: bytes, tree_size: int, leaf_index: int, leaf: bytes, proof: InclusionProof
) -> bool:
    """True iff the path recomputes `root`; stateless, no storage access.

    Malformed proofs return False rather than raising.
    """
    if proof.leaf_index != leaf_index or proof.tree_size != tree_size:
        return False
    if tree_size < 1 or not 0 <= leaf_index < tree_size:
        return False
    if len(leaf) != DIGEST_LEN:
        return False
    fn, sn = leaf_index, tree_size - 1
    r = leaf
    for p in proof.path:
        if len(p) != DIGEST_LEN or sn == 0:
            return False
        if fn & 1 or fn == sn:
            r = node_hash(p, r)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            r = node_hash(r, p)
        fn >>= 1
        sn >>= 1
    return sn == 0 and r == root


def verify_consistency(
    old_root: bytes, old_size: int, new_root: bytes, new_size: int, proof: ConsistencyProof
) -> bool:
    """True iff the proof links old_root/old_size as a prefix of
    new_root/new_size; stateless. Malformed proofs return False."""
    if proof.old_size != old_size or proof.new_size != new_size:
        return False
    if old_size < 1 or new_size < old_size:
        return False
    path = list(proof.path)
    if old_size == new_size:
        return path == [] and old_root == new_root
    if any(len(p) != DIGEST_LEN for p in path):
        return False
    # When the old tree is a perfect subtree its root is omitted from the
    # proof; reinstate it as the seed value.
    if old_size & (old_size - 1) == 0:
        path.insert(0, old_root)
    if not path:
        return False
    fn, sn = old_size - 1, new_size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = path[0]
    for c in path[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = node_hash(c, fr)
            sr = node_hash(c, sr)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            sr = node_hash(sr, c)
        fn >>= 1
        sn >>= 1
    return sn == 0 and fr == old_root and sr == new_root
