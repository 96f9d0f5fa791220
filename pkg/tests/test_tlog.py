"""Merkle tree conformance: published RFC 6962 vectors, brute-force oracle
sweeps, domain separation, and proof verifier behavior."""

import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guardlog.errors import NotFound
from guardlog.tlog import (
    ConsistencyProof,
    InclusionProof,
    MemoryNodeStore,
    MerkleLog,
    leaf_hash,
    node_hash,
    verify_consistency,
    verify_inclusion,
)

from merkle_oracle import mth, path as oracle_path, proof as oracle_proof

# Reference leaves and tree heads published with the RFC 6962 test suite.
RFC_LEAVES = [
    b"",
    b"\x00",
    b"\x10",
    b"\x20\x21",
    b"\x30\x31",
    b"\x40\x41\x42\x43",
    b"\x50\x51\x52\x53\x54\x55\x56\x57",
    b"\x60\x61\x62\x63\x64\x65\x66\x67\x68\x69\x6a\x6b\x6c\x6d\x6e\x6f",
]

RFC_ROOTS = [
    "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d",
    "fac54203e7cc696cf0dfcb42c92a1d9dbaf70ad9e621f4bd8d98662f00e3c125",
    "aeb6bcfe274b70a14fb067a5e5578264db0fa9b51af5e0ba159158f329e06e77",
    "d37ee418976dd95753c1c73862b9398fa2a2cf9b4ff0fdfe8b30cd95209614b7",
    "4e3bbb1f7b478dcfe71fb631631519a3bca12c9aefca1612bfce4c13a86264d4",
    "76e67dadbcdf1e10e1b74ddc608abd2f98dfb16fbce75277b5232a127f2087ef",
    "ddb89be403809e325750d3d263cd78929c2942b7942a34b77e122c9594a74c8c",
    "5dc9da79a70659a9ad559cb701ded9a2ab9d823aad2f4960cfe370eff4604328",
]


def build_log(leaves):
    log = MerkleLog(MemoryNodeStore())
    for data in leaves:
        log.append(leaf_hash(data))
    return log


def test_leaf_hash_empty_input():
    assert leaf_hash(b"").hex() == (
        "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d"
    )
    assert leaf_hash(b"") == hashlib.sha256(b"\x00").digest()


def test_leaf_hash_distinct_inputs():
    assert leaf_hash(b"hello") != leaf_hash(b"hello\x00")


def test_domain_separation():
    x = bytes(range(64))
    assert leaf_hash(x) != node_hash(x[:32], x[32:])


def test_node_hash_order_sensitive():
    a, b = leaf_hash(b"a"), leaf_hash(b"b")
    assert node_hash(a, b) != node_hash(b, a)


def test_two_leaf_root_by_hand():
    log = build_log([b"d0", b"d1"])
    assert log.root() == node_hash(leaf_hash(b"d0"), leaf_hash(b"d1"))


def test_three_leaf_root_unbalanced():
    l0, l1, l2 = (leaf_hash(d) for d in (b"a", b"b", b"c"))
    log = build_log([b"a", b"b", b"c"])
    assert log.root() == node_hash(node_hash(l0, l1), l2)


def test_rfc6962_reference_roots():
    # Frozen published vectors; the oracle must agree with them too.
    for n in range(1, 9):
        log = build_log(RFC_LEAVES[:n])
        assert log.root().hex() == RFC_ROOTS[n - 1], f"size {n}"
        assert mth(RFC_LEAVES[:n]).hex() == RFC_ROOTS[n - 1], f"oracle size {n}"


def test_empty_tree_root_is_null_sentinel():
    log = MerkleLog(MemoryNodeStore())
    assert log.root() is None


def test_single_leaf_root_is_the_leaf():
    log = build_log([b"only"])
    assert log.root() == leaf_hash(b"only")
    proof = log.prove_inclusion(0)
    assert proof.path == []


def test_inclusion_proofs_match_oracle_and_verify_sizes_1_to_64():
    leaves = [b"leaf-%d" % i for i in range(64)]
    log = build_log(leaves)
    for size in range(1, 65):
        root = log.root_at(size)
        assert root == mth(leaves[:size])
        for index in range(size):
            proof = log.prove_inclusion(index, size)
            assert proof.path == oracle_path(index, leaves[:size])
            assert verify_inclusion(root, size, index, leaf_hash(leaves[index]), proof)


def test_consistency_proofs_match_oracle_and_verify():
    leaves = [b"entry-%d" % i for i in range(40)]
    log = build_log(leaves)
    for old in range(1, 41):
        for new in range(old, 41):
            proof = log.prove_consistency(old, new)
            assert proof.path == (oracle_proof(old, leaves[:new]) if old < new else [])
            assert verify_consistency(
                mth(leaves[:old]), old, mth(leaves[:new]), new, proof
            )


# Named node hashes of the RFC's worked 7-leaf example tree: a..f,j are the
# leaf hashes of d0..d6; g=ab, h=cd, i=ef, k=gh, l=ij.
_A = "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d"
_B = "96a296d224f285c67bee93c30f8a309157f0daa35dc5b87e410b78630a09cfc7"
_C = "0298d122906dcfc10892cb53a73992fc5b9f493ea4c9badb27b791b4127a7fe7"
_D = "07506a85fd9dd2f120eb694f86011e5bb4662e5c415a62917033d4a9624487e7"
_F = "4271a26be0d8a84f0bd54c8c302e7cb3a3b5d1fa6780a40bcce2873477dab658"
_G = "fac54203e7cc696cf0dfcb42c92a1d9dbaf70ad9e621f4bd8d98662f00e3c125"
_H = "5f083f0a1a33ca076a95279832580db3e0ef4584bdff1f54c8a360f50de3031e"
_I = "0ebc5d3437fbe2db158b9f126a1d118e308181031d0a949f8dededebc558ef6a"
_J = "b08693ec2e721597130641e8211e7eedccb4c26413963eee6c1e2ed16ffb1a5f"
_K = "d37ee418976dd95753c1c73862b9398fa2a2cf9b4ff0fdfe8b30cd95209614b7"
_L = "837dbb152e9b079010717e84e865da4ebc0fa198a806d59d31bf15accef22d0e"


def test_rfc6962_published_inclusion_vectors():
    # The RFC's own worked examples at tree size 7: the inclusion proof for
    # d0 is [b, h, l]; for d3 [c, g, l]; for d4 [f, j, k]; for d6 [i, k].
    log = build_log(RFC_LEAVES[:7])
    vectors = {
        0: [_B, _H, _L],
        3: [_C, _G, _L],
        4: [_F, _J, _K],
        6: [_I, _K],
    }
    for index, expected in vectors.items():
        proof = log.prove_inclusion(index, 7)
        assert [h.hex() for h in proof.path] == expected, index


def test_rfc6962_published_consistency_vectors():
    # RFC worked examples: PROOF(3, D[7]) = [c, d, g, l];
    # PROOF(4, D[7]) = [l]; PROOF(6, D[7]) = [i, j, k].
    log = build_log(RFC_LEAVES[:7])
    vectors = {
        3: [_C, _D, _G, _L],
        4: [_L],
        6: [_I, _J, _K],
    }
    for old, expected in vectors.items():
        proof = log.prove_consistency(old, 7)
        assert [h.hex() for h in proof.path] == expected, old


def test_append_only_incremental_root_matches_batch_recompute():
    leaves = [b"item-%d" % i for i in range(10)]
    log = MerkleLog(MemoryNodeStore())
    for i, data in enumerate(leaves):
        log.append(leaf_hash(data))
        assert log.root() == mth(leaves[: i + 1])


def test_append_never_overwrites_nodes():
    store = MemoryNodeStore()
    log = MerkleLog(store)
    snapshots = {}
    for i in range(32):
        log.append(leaf_hash(b"x%d" % i))
        for key, value in snapshots.items():
            assert store.nodes[key] == value
        snapshots = dict(store.nodes)


def test_inclusion_out_of_range():
    log = build_log([b"a", b"b"])
    with pytest.raises(NotFound):
        log.prove_inclusion(2)
    with pytest.raises(NotFound):
        log.prove_inclusion(0, 3)


def test_consistency_out_of_range():
    log = build_log([b"a", b"b"])
    with pytest.raises(NotFound):
        log.prove_consistency(0)
    with pytest.raises(NotFound):
        log.prove_consistency(3)


def test_verify_inclusion_rejects_wrong_leaf_and_index():
    leaves = [b"ev-%d" % i for i in range(10)]
    log = build_log(leaves)
    root = log.root()
    proof = log.prove_inclusion(3)
    assert verify_inclusion(root, 10, 3, leaf_hash(leaves[3]), proof)
    assert not verify_inclusion(root, 10, 3, leaf_hash(b"tampered"), proof)
    wrong_index = InclusionProof(4, 10, proof.path)
    assert not verify_inclusion(root, 10, 4, leaf_hash(leaves[3]), wrong_index)


def test_verify_consistency_trivial_and_equivocation():
    leaves = [b"e-%d" % i for i in range(8)]
    log = build_log(leaves)
    root = log.root()
    empty = ConsistencyProof(8, 8, [])
    assert verify_consistency(root, 8, root, 8, empty)
    other = mth([b"different"])
    assert not verify_consistency(root, 8, other, 8, empty)


def test_forked_history_fails_consistency():
    honest = [b"h-%d" % i for i in range(10)]
    old_root = mth(honest)
    forked = list(honest)
    forked[3] = b"forged"
    forked += [b"f-%d" % i for i in range(5)]
    fork_log = build_log(forked)
    proof = fork_log.prove_consistency(10, 15)
    assert not verify_consistency(old_root, 10, fork_log.root(), 15, proof)


def test_table_path_lengths():
    # Max inclusion path length is ceil(log2 n); exact per the scaling table.
    expectations = {10: 4, 50: 6, 100: 7, 500: 9, 1000: 10}
    log = MerkleLog(MemoryNodeStore())
    appended = 0
    for size in sorted(expectations):
        while appended < size:
            log.append(leaf_hash(b"n%d" % appended))
            appended += 1
        max_len = max(len(log.prove_inclusion(i, size).path) for i in range(size))
        assert max_len == expectations[size]


def test_average_path_length_at_size_10():
    log = build_log([b"a%d" % i for i in range(10)])
    total = sum(len(log.prove_inclusion(i).path) for i in range(10))
    assert total == 36  # average 3.6


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=200), st.randoms(use_true_random=False))
def test_random_sizes_roots_match_oracle(size, rnd):
    leaves = [bytes([rnd.randrange(256) for _ in range(8)]) for _ in range(size)]
    log = build_log(leaves)
    assert log.root() == mth(leaves)
    index = rnd.randrange(size)
    proof = log.prove_inclusion(index)
    assert verify_inclusion(log.root(), size, index, leaf_hash(leaves[index]), proof)


def test_proof_json_round_trip():
    log = build_log([b"x", b"y", b"z"])
    proof = log.prove_inclusion(1)
    doc = proof.to_doc()
    assert set(doc) == {"leaf_index", "tree_size", "path"}
    assert InclusionProof.from_doc(doc) == proof
    cons = log.prove_consistency(2)
    assert ConsistencyProof.from_doc(cons.to_doc()) == cons
