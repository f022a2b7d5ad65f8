"""Hash-chained block log of propagation records.

Everything that gets hashed goes through :func:`canonical_encode`: 8-byte
big-endian integers, big-endian binary64 reals, 1-byte enum ordinals, maps in
ascending key-ordinal order and 8-byte length prefixes on lists.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .trust import Decision, Topic

ZERO_HASH = bytes(32)
DEFAULT_MAX_LEN = 20


class ChainFull(Exception):
    pass


class InvalidChain(Exception):
    pass


class MessageNotFound(LookupError):
    pass


class TamperedProvenance(Exception):
    pass


class ExportFormatError(ValueError):
    pass


class DigestKind(enum.IntEnum):
    SIMD = 0
    Miner = 1
    Verification = 2
    Blocking = 3


def _u64(x: int) -> bytes:
    return struct.pack(">Q", x)


def _f64(x: float) -> bytes:
    return struct.pack(">d", x)


def _enum(x: enum.IntEnum) -> bytes:
    return bytes([int(x)])


def _cred_map(m: Mapping[Topic, float]) -> bytes:
    keys = sorted(m, key=int)
    return _u64(len(keys)) + b"".join(_enum(k) + _f64(m[k]) for k in keys)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class NodeProperty:
    node_id: int
    credibility: Mapping[Topic, float]
    info_type: Topic

    def encode(self) -> bytes:
        return _u64(self.node_id) + _cred_map(self.credibility) + _enum(self.info_type)

    def hash(self) -> bytes:
        return sha256(self.encode())


@dataclass(frozen=True)
class NodeService:
    message_id: int
    topic: Topic
    origin: int
    local_trust: float

    def encode(self) -> bytes:
        return (
            _u64(self.message_id)
            + _enum(self.topic)
            + _u64(self.origin)
            + _f64(self.local_trust)
        )


@dataclass(frozen=True)
class SIMD:
    np: NodeProperty
    ns: NodeService
    generator_np_hash: bytes
    kind = DigestKind.SIMD

    def body(self) -> bytes:
        return self.np.encode() + self.ns.encode()


@dataclass(frozen=True)
class MinerMD:
    block_ref: bytes
    generator_np_hash: bytes
    kind = DigestKind.Miner

    def body(self) -> bytes:
        return self.block_ref


@dataclass(frozen=True)
class VerificationMD:
    message_id: int
    verifier: int
    decision: Decision
    score: float
    generator_np_hash: bytes
    kind = DigestKind.Verification

    def body(self) -> bytes:
        return (
            _u64(self.message_id)
            + _u64(self.verifier)
            + _enum(self.decision)
            + _f64(self.score)
        )


@dataclass(frozen=True)
class BlockingMD:
    message_id: int
    origin: int
    new_credibility: Mapping[Topic, float]
    generator_np_hash: bytes
    kind = DigestKind.Blocking

    def body(self) -> bytes:
        return _u64(self.message_id) + _u64(self.origin) + _cred_map(self.new_credibility)


MessageDigest = Union[SIMD, MinerMD, VerificationMD, BlockingMD]


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    timestamp: int
    digests: tuple[MessageDigest, ...]
    info_weight: float
    block_hash: bytes = b""

    def content_hash(self) -> bytes:
        return sha256(canonical_encode(self))


def canonical_encode(obj) -> bytes:
    if isinstance(obj, Block):
        return (
            _u64(obj.index)
            + obj.prev_hash
            + _u64(obj.timestamp)
            + _u64(len(obj.digests))
            + b"".join(canonical_encode(d) for d in obj.digests)
            + _f64(obj.info_weight)
        )
    if isinstance(obj, (SIMD, MinerMD, VerificationMD, BlockingMD)):
        return _enum(obj.kind) + obj.body() + obj.generator_np_hash
    if isinstance(obj, (NodeProperty, NodeService)):
        return obj.encode()
    raise TypeError(f"cannot encode {type(obj).__name__}")


def genesis_block() -> Block:
    b = Block(0, ZERO_HASH, 0, (), 0.0)
    return Block(0, ZERO_HASH, 0, (), 0.0, b.content_hash())


@dataclass
class Chain:
    blocks: list[Block] = field(default_factory=lambda: [genesis_block()])
    max_len: int = DEFAULT_MAX_LEN

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]


@dataclass(frozen=True)
class ChainCheck:
    valid: bool
    index: int | None = None

    def __str__(self) -> str:
        return "Valid" if self.valid else f"InvalidAt({self.index})"


VALID = ChainCheck(True)


def verify_chain(chain: Chain) -> ChainCheck:
    if not chain.blocks:
        return ChainCheck(False, 0)
    prev = None
    for k, b in enumerate(chain.blocks):
        if b.index != k:
            return ChainCheck(False, k)
        if k == 0 and b.prev_hash != ZERO_HASH:
            return ChainCheck(False, 0)
        if prev is not None and b.prev_hash != prev.block_hash:
            return ChainCheck(False, k)
        if b.block_hash != b.content_hash():
            return ChainCheck(False, k)
        prev = b
    if len(chain.blocks) > chain.max_len:
        return ChainCheck(False, chain.max_len)
    return VALID


def append_block(
    chain: Chain,
    digests: Sequence[MessageDigest],
    timestamp: int,
    info_weight: float,
) -> Chain:
    if len(chain) >= chain.max_len:
        raise ChainFull(f"chain already holds {chain.max_len} blocks")
    check = verify_chain(chain)
    if not check.valid:
        raise InvalidChain(f"chain invalid at block {check.index}")
    draft = Block(len(chain), chain.head.block_hash, timestamp, tuple(digests), info_weight)
    chain.blocks.append(
        Block(draft.index, draft.prev_hash, timestamp, draft.digests, info_weight,
              draft.content_hash())
    )
    return chain


def trace_source(chain: Chain, message_id: int) -> int:
    """Origin of ``message_id`` from the earliest SIMD that carries it."""
    for b in chain.blocks:
        for d in b.digests:
            if isinstance(d, SIMD) and d.ns.message_id == message_id:
                if d.np.hash() != d.generator_np_hash:
                    raise TamperedProvenance(
                        f"message {message_id}: NP hash mismatch in block {b.index}"
                    )
                return d.np.node_id
    raise MessageNotFound(f"message {message_id} not in chain")


def provenance_consistent(chain: Chain) -> bool:
    """Every digest's generator hash matches an NP injected earlier in the chain."""
    known: set[bytes] = set()
    for b in chain.blocks:
        for d in b.digests:
            if isinstance(d, SIMD):
                if d.np.hash() != d.generator_np_hash:
                    return False
                known.add(d.generator_np_hash)
            elif d.generator_np_hash not in known:
                return False
    return True


# -- export -----------------------------------------------------------------
#
# One block per line, compact sorted-key JSON.  Hashes are lowercase hex.
# A line is accepted only if it re-serialises to exactly the same text, so any
# byte-level edit either breaks parsing, breaks canonical form or changes the
# hashed content.

_HEX64 = re.compile(r"[0-9a-f]{64}")


def _hex(b: bytes) -> str:
    return b.hex()


def _unhex(s) -> bytes:
    if not isinstance(s, str) or not _HEX64.fullmatch(s):
        raise ExportFormatError(f"bad hash field {s!r}")
    return bytes.fromhex(s)


def _cred_to_json(m):
    return {t.name: m[t] for t in sorted(m, key=int)}


def _req(d, key, typ):
    if key not in d:
        raise ExportFormatError(f"missing field {key!r}")
    v = d[key]
    if typ is int:
        ok = type(v) is int and v >= 0
    elif typ is float:
        ok = type(v) is float
    else:
        ok = isinstance(v, typ)
    if not ok:
        raise ExportFormatError(f"field {key!r} has wrong type")
    return v


def _topic(name) -> Topic:
    try:
        return Topic[name]
    except (KeyError, TypeError):
        raise ExportFormatError(f"unknown topic {name!r}") from None


def _cred_from_json(d):
    if not isinstance(d, dict):
        raise ExportFormatError("credibility must be an object")
    out = {}
    for k, v in d.items():
        if type(v) is not float:
            raise ExportFormatError("credibility values must be reals")
        out[_topic(k)] = v
    return out


def digest_to_json(d: MessageDigest) -> dict:
    out = {"kind": d.kind.name, "generator_np_hash": _hex(d.generator_np_hash)}
    if isinstance(d, SIMD):
        out["np"] = {
            "node_id": d.np.node_id,
            "credibility": _cred_to_json(d.np.credibility),
            "info_type": d.np.info_type.name,
        }
        out["ns"] = {
            "message_id": d.ns.message_id,
            "topic": d.ns.topic.name,
            "origin": d.ns.origin,
            "local_trust": d.ns.local_trust,
        }
    elif isinstance(d, MinerMD):
        out["block_ref"] = _hex(d.block_ref)
    elif isinstance(d, VerificationMD):
        out.update(
            message_id=d.message_id,
            verifier=d.verifier,
            decision=d.decision.name,
            score=d.score,
        )
    else:
        out.update(
            message_id=d.message_id,
            origin=d.origin,
            new_credibility=_cred_to_json(d.new_credibility),
        )
    return out


def digest_from_json(d) -> MessageDigest:
    if not isinstance(d, dict):
        raise ExportFormatError("digest must be an object")
    kind = _req(d, "kind", str)
    gen = _unhex(d.get("generator_np_hash"))
    if kind == "SIMD":
        np_, ns = _req(d, "np", dict), _req(d, "ns", dict)
        return SIMD(
            NodeProperty(
                _req(np_, "node_id", int),
                _cred_from_json(np_.get("credibility")),
                _topic(np_.get("info_type")),
            ),
            NodeService(
                _req(ns, "message_id", int),
                _topic(ns.get("topic")),
                _req(ns, "origin", int),
                _req(ns, "local_trust", float),
            ),
            gen,
        )
    if kind == "Miner":
        return MinerMD(_unhex(d.get("block_ref")), gen)
    if kind == "Verification":
        dec = _req(d, "decision", str)
        if dec not in Decision.__members__:
            raise ExportFormatError(f"unknown decision {dec!r}")
        return VerificationMD(
            _req(d, "message_id", int),
            _req(d, "verifier", int),
            Decision[dec],
            _req(d, "score", float),
            gen,
        )
    if kind == "Blocking":
        return BlockingMD(
            _req(d, "message_id", int),
            _req(d, "origin", int),
            _cred_from_json(d.get("new_credibility")),
            gen,
        )
    raise ExportFormatError(f"unknown digest kind {kind!r}")


def block_to_line(origin: int, b: Block) -> str:
    rec = {
        "origin": origin,
        "index": b.index,
        "block_hash": _hex(b.block_hash),
        "prev_hash": _hex(b.prev_hash),
        "timestamp": b.timestamp,
        "info_weight": b.info_weight,
        "digests": [digest_to_json(d) for d in b.digests],
    }
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def block_from_line(line: str) -> tuple[int, Block]:
    try:
        rec = json.loads(line)
    except ValueError as e:
        raise ExportFormatError(f"unparseable block record: {e}") from None
    if not isinstance(rec, dict):
        raise ExportFormatError("block record must be an object")
    digests = _req(rec, "digests", list)
    b = Block(
        _req(rec, "index", int),
        _unhex(rec.get("prev_hash")),
        _req(rec, "timestamp", int),
        tuple(digest_from_json(d) for d in digests),
        _req(rec, "info_weight", float),
        _unhex(rec.get("block_hash")),
    )
    origin = _req(rec, "origin", int)
    if block_to_line(origin, b) != line:
        raise ExportFormatError("block record is not in canonical form")
    return origin, b


def export_chains(chains: Mapping[int, Chain]) -> str:
    return "".join(
        block_to_line(o, b) + "\n" for o in sorted(chains) for b in chains[o].blocks
    )


def import_chains(text: str, max_len: int = DEFAULT_MAX_LEN) -> dict[int, Chain]:
    """Parse an export. Raises :class:`ExportFormatError` on anything that is
    not a canonical block record; hash checks are left to :func:`verify_chain`."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        raise ExportFormatError("export must end with a newline")
    chains: dict[int, Chain] = {}
    for line in lines:
        origin, b = block_from_line(line)
        chains.setdefault(origin, Chain(blocks=[], max_len=max_len)).blocks.append(b)
    return chains


def check_origin(origin: int, chain: Chain) -> ChainCheck:
    # the per-line origin label is not hashed; pin it to the injected NP
    for b in chain.blocks:
        for d in b.digests:
            if isinstance(d, SIMD) and d.np.node_id != origin:
                return ChainCheck(False, b.index)
    return VALID


def verify_export(text: str, max_len: int = DEFAULT_MAX_LEN) -> dict[int, ChainCheck]:
    out = {}
    for o, c in import_chains(text, max_len).items():
        check = verify_chain(c)
        out[o] = check if not check.valid else check_origin(o, c)
    return out


def export_is_valid(text: str, max_len: int = DEFAULT_MAX_LEN) -> bool:
    try:
        checks = verify_export(text, max_len)
    except ExportFormatError:
        return False
    return bool(checks) and all(c.valid for c in checks.values())


def iter_digests(chain: Chain) -> Iterable[MessageDigest]:
    for b in chain.blocks:
        yield from b.digests
