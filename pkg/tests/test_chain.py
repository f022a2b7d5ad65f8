import dataclasses
import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from veritas.chain import (
    SIMD,
    ZERO_HASH,
    Block,
    BlockingMD,
    Chain,
    ChainFull,
    ExportFormatError,
    InvalidChain,
    MessageNotFound,
    MinerMD,
    NodeProperty,
    NodeService,
    TamperedProvenance,
    VerificationMD,
    append_block,
    canonical_encode,
    export_chains,
    export_is_valid,
    genesis_block,
    import_chains,
    provenance_consistent,
    trace_source,
    verify_chain,
)
from veritas.trust import Decision, Topic

# sha256 of the 64-byte genesis encoding: index, zero prev hash, timestamp,
# digest count, info weight (all zero)
GENESIS_HASH = "f5a5fd42d16a20302798ef6ed309979b43003d2320d9f0e8ea9831a92759fb4b"

CRED = {Topic.Pol: 0.25, Topic.Tech: 0.5, Topic.Movie: 0.75, Topic.Research: 1.0}


def np_(node=7, topic=Topic.Tech):
    return NodeProperty(node, CRED, topic)


def simd(node=7, msg=1, topic=Topic.Tech, lt=0.1):
    p = np_(node, topic)
    return SIMD(p, NodeService(msg, topic, node, lt), p.hash())


def hop_digests(chain, node=7, msg=1, decision=Decision.Validated, score=0.6):
    gen = np_(node).hash()
    out = [
        VerificationMD(msg, node + 1, decision, score, gen),
        MinerMD(chain.head.block_hash, gen),
    ]
    if decision is Decision.Blocked:
        out.append(BlockingMD(msg, node, {**CRED, Topic.Tech: score}, gen))
    return out


def built_chain(hops=3, node=7):
    c = Chain()
    append_block(c, [simd(node=node)], 0, 0.0)
    for h in range(1, hops + 1):
        dec = Decision.Blocked if h == hops else Decision.Validated
        append_block(c, hop_digests(c, node=node, decision=dec), h, 0.5 * 0.6)
    return c


def test_genesis_pinned():
    g = genesis_block()
    assert len(canonical_encode(g)) == 64
    assert g.block_hash.hex() == GENESIS_HASH
    assert g.block_hash == hashlib.sha256(bytes(64)).digest()
    assert g.prev_hash == ZERO_HASH
    assert str(verify_chain(Chain())) == "Valid"


def test_encoding_deterministic_and_injective():
    a = simd()
    assert canonical_encode(a) == canonical_encode(simd())
    variants = [
        simd(node=8), simd(msg=2), simd(topic=Topic.Pol), simd(lt=0.2),
        SIMD(NodeProperty(7, {**CRED, Topic.Pol: 0.3}, Topic.Tech), a.ns, a.generator_np_hash),
    ]
    encs = {canonical_encode(v) for v in variants}
    assert len(encs) == len(variants)
    assert canonical_encode(a) not in encs
    with pytest.raises(TypeError):
        canonical_encode("block")


def test_digest_kinds_distinguished():
    gen = np_().hash()
    v = VerificationMD(1, 2, Decision.Validated, 0.5, gen)
    w = dataclasses.replace(v, decision=Decision.Blocked)
    assert canonical_encode(v) != canonical_encode(w)
    assert canonical_encode(v)[0] != canonical_encode(MinerMD(bytes(32), gen))[0]


def test_append_links_blocks():
    c = built_chain(3)
    assert len(c) == 5
    for k in range(1, len(c)):
        assert c.blocks[k].index == k
        assert c.blocks[k].prev_hash == c.blocks[k - 1].block_hash
        assert c.blocks[k].block_hash == c.blocks[k].content_hash()
    assert verify_chain(c).valid


def test_chain_full_at_capacity():
    c = Chain(max_len=20)
    for t in range(19):
        append_block(c, [], t + 1, 0.0)
    assert len(c) == 20 and verify_chain(c).valid
    with pytest.raises(ChainFull):
        append_block(c, [], 99, 0.0)
    assert len(c) == 20


def test_append_refuses_broken_chain():
    c = built_chain(2)
    c.blocks[1] = dataclasses.replace(c.blocks[1], timestamp=42)
    with pytest.raises(InvalidChain):
        append_block(c, [], 9, 0.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_tamper_detected_at_modified_block(k):
    c = built_chain(3)
    c.blocks[k] = dataclasses.replace(c.blocks[k], info_weight=c.blocks[k].info_weight + 1.0)
    assert str(verify_chain(c)) == f"InvalidAt({k})"


def test_rehashed_tamper_breaks_next_link():
    c = built_chain(3)
    b = dataclasses.replace(c.blocks[2], timestamp=77)
    c.blocks[2] = dataclasses.replace(b, block_hash=b.content_hash())
    assert str(verify_chain(c)) == "InvalidAt(3)"


def test_structural_failures():
    assert str(verify_chain(Chain(blocks=[]))) == "InvalidAt(0)"
    c = built_chain(1)
    c.blocks[0] = dataclasses.replace(c.blocks[0], prev_hash=b"\x01" * 32)
    assert str(verify_chain(c)) == "InvalidAt(0)"
    c = built_chain(1)
    del c.blocks[1]
    assert not verify_chain(c).valid
    c = built_chain(3)
    c.max_len = 3
    assert str(verify_chain(c)) == "InvalidAt(3)"


def test_trace_source():
    c = built_chain(3)
    assert trace_source(c, 1) == 7
    assert provenance_consistent(c)
    with pytest.raises(MessageNotFound):
        trace_source(c, 2)


def test_trace_detects_tampered_provenance():
    c = Chain()
    good = simd()
    forged = SIMD(np_(node=9), good.ns, good.generator_np_hash)
    append_block(c, [forged], 0, 0.0)
    assert verify_chain(c).valid  # hashes are consistent, provenance is not
    with pytest.raises(TamperedProvenance):
        trace_source(c, 1)
    assert not provenance_consistent(c)


def test_provenance_requires_earlier_simd():
    c = Chain()
    append_block(c, hop_digests(c), 1, 0.0)
    assert not provenance_consistent(c)


def test_export_round_trip():
    chains = {7: built_chain(3), 3: built_chain(1, node=3)}
    text = export_chains(chains)
    assert text.endswith("\n")
    assert text.count("\n") == sum(len(c) for c in chains.values())
    back = import_chains(text)
    assert sorted(back) == [3, 7]
    for o in chains:
        assert back[o].blocks == chains[o].blocks
    assert export_chains(back) == text
    assert export_is_valid(text)


def test_import_rejects_malformed():
    text = export_chains({7: built_chain(1)})
    with pytest.raises(ExportFormatError):
        import_chains(text.rstrip("\n"))
    with pytest.raises(ExportFormatError):
        import_chains(text.replace('"index":1', '"index": 1'))
    with pytest.raises(ExportFormatError):
        import_chains("{}\n")
    assert not export_is_valid("")


EXPORT = export_chains({7: built_chain(3), 12: built_chain(2, node=12)}).encode()


@given(st.integers(0, len(EXPORT) * 8 - 1))
@settings(max_examples=2000, deadline=None)
def test_single_bit_flip_detected(bit):
    data = bytearray(EXPORT)
    data[bit // 8] ^= 1 << (bit % 8)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        return
    assert not export_is_valid(text)


@given(st.lists(st.integers(0, len(EXPORT) * 8 - 1), min_size=2, max_size=6, unique=True))
@settings(max_examples=300, deadline=None)
def test_multi_bit_flip_detected(bits):
    data = bytearray(EXPORT)
    for bit in bits:
        data[bit // 8] ^= 1 << (bit % 8)
    if bytes(data) == EXPORT:
        return
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        return
    assert not export_is_valid(text)


def test_prev_hash_edit_reported_at_that_block():
    c = built_chain(3)
    assert len(c) == 5 and verify_chain(c).valid
    c.blocks[3] = dataclasses.replace(c.blocks[3], prev_hash=b"\xab" * 32)
    assert str(verify_chain(c)) == "InvalidAt(3)"


def test_relabelled_origin_rejected():
    text = export_chains({7: built_chain(2)})
    assert export_is_valid(text)
    assert not export_is_valid(text.replace('"origin":7', '"origin":8'))
