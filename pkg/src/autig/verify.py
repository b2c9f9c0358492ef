"""Stateless fragment verification and order-fault construction.

Verification is a pure function of the fragment and the public parameters.
The checks run in a fixed order so rejection codes are deterministic:

1.  missing proof accepts only an empty prefix
2.  salt and digest binding
3.  batch shape (n - f orders, distinct replicas, right round) and signatures
4.  duplicate-free prefix
5.  per-tx state recomputation from the batch, and state assertions covering
    exactly the prefix
6.  infix covers exactly the ordered pairs of the prefix; frontier cardinality
7.  asserted totals dominate recomputed batch counts (no negative history)
8.  frontier rows belong to (batch-non-blank minus prefix) x prefix and none
    of them satisfies the edge predicate into the prefix
9.  re-running the deterministic extractor on the proof-induced graph must
    reproduce the proposed prefix exactly

One pair operation is counted per unordered infix pair and per frontier row,
so verification work is linear in the proof and independent of any leader
state.
"""

from __future__ import annotations

from .crypto import DEFAULT_HASH, HashFn, SignatureScheme, compute_salt
from .errors import CannotAccuseAcceptedFragment
from .extract import assemble_prefix, condense_and_toposort, find_anchor, tarjan_scc
from .fragments import (
    Fragment,
    OrderFault,
    RejectCode,
    compute_fragment_digest,
    order_fault_signing_bytes,
)
from .localorder import local_order_signature_valid
from .params import ProtocolParams, ReplicaId, Thresholds, determine_state, TxState
from .predicate import PairOpCounter, edge_predicate, orient_edge
from .utig import count_batch_pair_weights, count_batch_support

TxId = bytes


def verify_fragment(
    frag: Fragment,
    params: ProtocolParams,
    th: Thresholds,
    scheme: SignatureScheme,
    counter: PairOpCounter | None = None,
    hashfn: HashFn = DEFAULT_HASH,
) -> RejectCode | None:
    """Audit a fragment; returns None on accept or the first failing check."""
    hdr = frag.header
    proof = frag.proof
    f_list = frag.final_order

    if proof is None:
        return None if len(f_list) == 0 else RejectCode.NO_ANCHOR

    if hdr.salt != compute_salt(hdr.h_prev, hdr.round, hdr.leader_pk, hashfn):
        return RejectCode.BAD_SALT
    if hdr.digest != compute_fragment_digest(
        f_list, frag.batch, proof, hdr.h_prev, hashfn
    ):
        return RejectCode.BAD_DIGEST

    if len(frag.batch) != params.batch_size:
        return RejectCode.BAD_BATCH_SHAPE
    replicas = {lo.replica.pubkey for lo in frag.batch}
    if len(replicas) != len(frag.batch):
        return RejectCode.BAD_BATCH_SHAPE
    if any(lo.round != hdr.round for lo in frag.batch):
        return RejectCode.BAD_BATCH_SHAPE
    for lo in frag.batch:
        if not local_order_signature_valid(lo, scheme):
            return RejectCode.BAD_BATCH_SIGNATURE

    in_f = set(f_list)
    if len(in_f) != len(f_list):
        return RejectCode.ORDER_MISMATCH  # duplicates can never be canonical

    support = count_batch_support(frag.batch)
    batch_weights = count_batch_pair_weights(frag.batch)

    for tx, asserted in proof.states.items():
        if determine_state(support.get(tx, 0), th) != asserted:
            return RejectCode.STATE_MISMATCH
    if set(proof.states) != in_f:
        return RejectCode.STATE_MISMATCH

    batch_nonblank = {
        tx
        for tx, c in support.items()
        if determine_state(c, th) != TxState.BLANK
    }

    expected_infix = len(f_list) * (len(f_list) - 1)
    if len(proof.infix) != expected_infix:
        return RejectCode.INFIX_SIZE_MISMATCH
    for (u, v), (w_uv, w_vu) in proof.infix.items():
        if u not in in_f or v not in in_f or u == v:
            return RejectCode.INFIX_SIZE_MISMATCH
        mirror = proof.infix.get((v, u))
        if mirror != (w_vu, w_uv):
            return RejectCode.INFIX_SIZE_MISMATCH

    expected_frontier = len(batch_nonblank - in_f) * len(f_list)
    if len(proof.frontier) != expected_frontier:
        return RejectCode.FRONTIER_SIZE_MISMATCH

    for table in (proof.infix, proof.frontier):
        for (a, b), (w_ab, w_ba) in table.items():
            if w_ab < batch_weights.get((a, b), 0) or w_ba < batch_weights.get(
                (b, a), 0
            ):
                return RejectCode.NEGATIVE_HISTORY

    adj: dict[TxId, list[TxId]] = {tx: [] for tx in f_list}
    for (u, v), (w_uv, w_vu) in proof.infix.items():
        if u < v:
            if counter is not None:
                counter.add()
            oriented = orient_edge(u, v, w_uv, w_vu, th)
            if oriented is not None:
                adj[oriented[0]].append(oriented[1])
    for tx in adj:
        adj[tx].sort()

    for (x, y), (w_xy, w_yx) in proof.frontier.items():
        if x not in batch_nonblank or x in in_f or y not in in_f:
            return RejectCode.FRONTIER_MEMBERSHIP
        if counter is not None:
            counter.add()
        if edge_predicate(x, y, w_xy, w_yx, th):
            return RejectCode.FRONTIER_EDGE_INTO_F

    vertices = sorted(in_f)
    sccs = tarjan_scc(vertices, adj)
    topo = condense_and_toposort(sccs, adj)
    anchor = find_anchor(topo, sccs, proof.states)
    if f_list and anchor is None:
        return RejectCode.NO_ANCHOR
    rebuilt, _ = assemble_prefix(topo, sccs, anchor, hdr.salt, hashfn)
    if rebuilt != f_list:
        return RejectCode.ORDER_MISMATCH
    return None


def make_order_fault(
    frag: Fragment,
    params: ProtocolParams,
    th: Thresholds,
    scheme: SignatureScheme,
    leader_sig: bytes,
    accuser: ReplicaId,
    accuser_secret: bytes,
    hashfn: HashFn = DEFAULT_HASH,
) -> OrderFault:
    """Build a signed complaint for a fragment that fails verification."""
    code = verify_fragment(frag, params, th, scheme, hashfn=hashfn)
    if code is None:
        raise CannotAccuseAcceptedFragment("fragment verifies; nothing to accuse")
    sig = scheme.sign(accuser_secret, order_fault_signing_bytes(frag.header.digest, code))
    return OrderFault(
        h_f=frag.header.digest,
        leader_sig=leader_sig,
        accuser=accuser,
        accuser_sig=sig,
        reason=code,
    )


def order_fault_valid(
    fault: OrderFault, leader_pk: bytes, scheme: SignatureScheme
) -> bool:
    """Both signatures must bind: the leader's over the digest, the accuser's
    over (digest, reason)."""
    if not scheme.verify(leader_pk, fault.h_f, fault.leader_sig):
        return False
    return scheme.verify(
        fault.accuser.pubkey,
        order_fault_signing_bytes(fault.h_f, fault.reason),
        fault.accuser_sig,
    )
