"""Proof-carrying fragment objects and their canonical encoding.

A fragment bundles the proposed prefix F, the raw batch of local orders that
justified it, and the proof data a stateless follower needs: per-transaction
state assertions, cumulative totals for every ordered pair inside F, and
totals for the full frontier (batch-non-blank outside F) x F. The fragment
digest chains to the previous committed digest and is the object consensus
commits; the same encoding is the on-disk `.frag` format.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .crypto import FRAG_TAG, DEFAULT_HASH, HashFn
from .encoding import (
    Reader,
    encode_bytes32,
    encode_u32,
    encode_u64,
    encode_var_bytes,
)
from .errors import ParseError
from .localorder import LocalOrder, decode_local_order, encode_local_order
from .params import ReplicaId, TxState

TxId = bytes


class RejectCode(enum.Enum):
    BAD_SALT = "BadSalt"
    BAD_DIGEST = "BadDigest"
    STATE_MISMATCH = "StateMismatch"
    INFIX_SIZE_MISMATCH = "InfixSizeMismatch"
    FRONTIER_SIZE_MISMATCH = "FrontierSizeMismatch"
    NEGATIVE_HISTORY = "NegativeHistory"
    FRONTIER_EDGE_INTO_F = "FrontierEdgeIntoF"
    FRONTIER_MEMBERSHIP = "FrontierMembership"
    NO_ANCHOR = "NoAnchor"
    ORDER_MISMATCH = "OrderMismatch"
    BAD_BATCH_SIGNATURE = "BadBatchSignature"
    BAD_BATCH_SHAPE = "BadBatchShape"


@dataclass(frozen=True)
class ProofData:
    """Assertions accompanying a nonempty prefix.

    states maps every tx in F to its asserted state. infix maps every ordered
    pair (u, v) of distinct members of F to the asserted cumulative totals
    (W(u,v), W(v,u)); both directions are present. frontier does the same for
    every pair (x, y) with x batch-non-blank outside F and y in F.
    """

    states: dict[TxId, TxState]
    infix: dict[tuple[TxId, TxId], tuple[int, int]]
    frontier: dict[tuple[TxId, TxId], tuple[int, int]]


@dataclass(frozen=True)
class FragmentHeader:
    round: int
    leader_pk: bytes
    h_prev: bytes
    salt: bytes
    digest: bytes


@dataclass(frozen=True)
class Fragment:
    header: FragmentHeader
    final_order: tuple[TxId, ...]
    batch: tuple[LocalOrder, ...]
    proof: ProofData | None


@dataclass(frozen=True)
class OrderFault:
    """Non-repudiable complaint about a rejected fragment."""

    h_f: bytes
    leader_sig: bytes
    accuser: ReplicaId
    accuser_sig: bytes
    reason: RejectCode


def encode_proof(proof: ProofData) -> bytes:
    out = [encode_u32(len(proof.states))]
    for tx in sorted(proof.states):
        out.append(encode_bytes32(tx))
        out.append(bytes([int(proof.states[tx])]))
    for table in (proof.infix, proof.frontier):
        out.append(encode_u32(len(table)))
        for u, v in sorted(table):
            w_uv, w_vu = table[(u, v)]
            out.append(encode_bytes32(u))
            out.append(encode_bytes32(v))
            out.append(encode_u64(w_uv))
            out.append(encode_u64(w_vu))
    return b"".join(out)


def _decode_state_byte(b: int) -> TxState:
    try:
        return TxState(b)
    except ValueError:
        raise ParseError(f"unknown state byte {b}") from None


def decode_proof(r: Reader) -> ProofData:
    states: dict[TxId, TxState] = {}
    prev = None
    for _ in range(r.u32()):
        tx = r.bytes32()
        if prev is not None and tx <= prev:
            raise ParseError("state keys not strictly ascending")
        prev = tx
        states[tx] = _decode_state_byte(r.byte())
    tables = []
    for _ in range(2):
        table: dict[tuple[TxId, TxId], tuple[int, int]] = {}
        prev_key = None
        for _ in range(r.u32()):
            u = r.bytes32()
            v = r.bytes32()
            key = (u, v)
            if prev_key is not None and key <= prev_key:
                raise ParseError("pair keys not strictly ascending")
            prev_key = key
            table[key] = (r.u64(), r.u64())
        tables.append(table)
    return ProofData(states=states, infix=tables[0], frontier=tables[1])


def _encode_proof_opt(proof: ProofData | None) -> bytes:
    if proof is None:
        return b"\x00"
    return b"\x01" + encode_proof(proof)


def _decode_proof_opt(r: Reader) -> ProofData | None:
    flag = r.byte()
    if flag == 0:
        return None
    if flag != 1:
        raise ParseError(f"bad proof presence flag {flag}")
    return decode_proof(r)


def fragment_body_bytes(
    final_order: tuple[TxId, ...],
    batch: tuple[LocalOrder, ...],
    proof: ProofData | None,
    h_prev: bytes,
) -> bytes:
    """Canonical enc(F, batch, proof, h_prev) that the fragment digest covers."""
    out = [encode_u32(len(final_order))]
    out.extend(encode_bytes32(t) for t in final_order)
    out.append(encode_u32(len(batch)))
    out.extend(encode_local_order(lo) for lo in batch)
    out.append(_encode_proof_opt(proof))
    out.append(encode_bytes32(h_prev))
    return b"".join(out)


def compute_fragment_digest(
    final_order: tuple[TxId, ...],
    batch: tuple[LocalOrder, ...],
    proof: ProofData | None,
    h_prev: bytes,
    hashfn: HashFn = DEFAULT_HASH,
) -> bytes:
    return hashfn(FRAG_TAG + fragment_body_bytes(final_order, batch, proof, h_prev))


def encode_fragment(frag: Fragment) -> bytes:
    """Bit-exact `.frag` representation: header fields then the body."""
    hdr = frag.header
    out = [
        encode_u64(hdr.round),
        encode_var_bytes(hdr.leader_pk),
        encode_bytes32(hdr.h_prev),
        encode_bytes32(hdr.salt),
        encode_bytes32(hdr.digest),
        fragment_body_bytes(frag.final_order, frag.batch, frag.proof, hdr.h_prev),
    ]
    return b"".join(out)


def decode_fragment(data: bytes) -> Fragment:
    r = Reader(data)
    round_ = r.u64()
    leader_pk = r.var_bytes()
    h_prev = r.bytes32()
    salt = r.bytes32()
    digest = r.bytes32()
    final_order = tuple(r.bytes32() for _ in range(r.u32()))
    batch = tuple(decode_local_order(r) for _ in range(r.u32()))
    proof = _decode_proof_opt(r)
    body_h_prev = r.bytes32()
    r.expect_done()
    if body_h_prev != h_prev:
        raise ParseError("body h_prev disagrees with header")
    hdr = FragmentHeader(
        round=round_, leader_pk=leader_pk, h_prev=h_prev, salt=salt, digest=digest
    )
    return Fragment(header=hdr, final_order=final_order, batch=batch, proof=proof)


def order_fault_signing_bytes(h_f: bytes, reason: RejectCode) -> bytes:
    return encode_bytes32(h_f) + encode_var_bytes(reason.value.encode())
