"""Deterministic fragment corruptions for fault injection.

Each mutation class takes an honest fragment and produces a minimally edited
one whose rejection code is forced by construction, so soundness harnesses
can assert an exact code rather than a probabilistic outcome. Content
mutations re-forge the digest (the attacker controls the whole fragment), so
the deeper check, not digest binding, is what fires. Preconditions say when
a class applies to a given fragment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .crypto import DEFAULT_HASH, compute_salt, sha256
from .fragments import (
    Fragment,
    FragmentHeader,
    ProofData,
    RejectCode,
    compute_fragment_digest,
)
from .utig import count_batch_pair_weights


def _reforge(frag: Fragment, final_order=None, proof=None, hashfn=DEFAULT_HASH) -> Fragment:
    f = frag.final_order if final_order is None else final_order
    p = frag.proof if proof is None else proof
    digest = compute_fragment_digest(f, frag.batch, p, frag.header.h_prev, hashfn)
    hdr = replace(frag.header, digest=digest)
    return Fragment(header=hdr, final_order=f, batch=frag.batch, proof=p)


def _first_deflatable(table, batch_weights):
    for key in sorted(table):
        if batch_weights.get(key, 0) >= 1:
            return key
    return None


def _reorder_f_ok(frag: Fragment) -> bool:
    return len(frag.final_order) >= 2


def _reorder_f(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    f = list(frag.final_order)
    f[0], f[-1] = f[-1], f[0]
    return _reforge(frag, final_order=tuple(f), hashfn=hashfn)


def _drop_f_ok(frag: Fragment) -> bool:
    return len(frag.final_order) >= 1


def _drop_f(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    return _reforge(frag, final_order=frag.final_order[:-1], hashfn=hashfn)


def _deflate_infix_ok(frag: Fragment) -> bool:
    if frag.proof is None or not frag.proof.infix:
        return False
    bw = count_batch_pair_weights(frag.batch)
    return _first_deflatable(frag.proof.infix, bw) is not None


def _deflate_infix(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    proof = frag.proof
    bw = count_batch_pair_weights(frag.batch)
    a, b = _first_deflatable(proof.infix, bw)
    low = bw[(a, b)] - 1
    infix = dict(proof.infix)
    _, w_ba = infix[(a, b)]
    infix[(a, b)] = (low, w_ba)
    infix[(b, a)] = (w_ba, low)  # keep mirror rows consistent
    return _reforge(frag, proof=replace(proof, infix=infix), hashfn=hashfn)


def _deflate_frontier_ok(frag: Fragment) -> bool:
    if frag.proof is None or not frag.proof.frontier:
        return False
    bw = count_batch_pair_weights(frag.batch)
    return _first_deflatable(frag.proof.frontier, bw) is not None


def _deflate_frontier(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    proof = frag.proof
    bw = count_batch_pair_weights(frag.batch)
    x, y = _first_deflatable(proof.frontier, bw)
    frontier = dict(proof.frontier)
    _, w_yx = frontier[(x, y)]
    frontier[(x, y)] = (bw[(x, y)] - 1, w_yx)
    return _reforge(frag, proof=replace(proof, frontier=frontier), hashfn=hashfn)


def _drop_frontier_ok(frag: Fragment) -> bool:
    return frag.proof is not None and len(frag.proof.frontier) >= 1


def _drop_frontier(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    proof = frag.proof
    frontier = dict(proof.frontier)
    del frontier[sorted(frontier)[0]]
    return _reforge(frag, proof=replace(proof, frontier=frontier), hashfn=hashfn)


def _flip_state_ok(frag: Fragment) -> bool:
    return frag.proof is not None and len(frag.proof.states) >= 1


def _flip_state(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    from .params import TxState

    proof = frag.proof
    states = dict(proof.states)
    tx = sorted(states)[0]
    states[tx] = TxState.SHADED if states[tx] == TxState.SOLID else TxState.SOLID
    return _reforge(frag, proof=replace(proof, states=states), hashfn=hashfn)


def _any_fragment(frag: Fragment) -> bool:
    return frag.proof is not None


def _wrong_salt(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    hdr = replace(frag.header, salt=sha256(frag.header.salt))
    return Fragment(
        header=hdr,
        final_order=frag.final_order,
        batch=frag.batch,
        proof=frag.proof,
    )


def _stale_h_prev(frag: Fragment, hashfn=DEFAULT_HASH) -> Fragment:
    stale = sha256(frag.header.h_prev)
    salt = compute_salt(stale, frag.header.round, frag.header.leader_pk, hashfn)
    hdr = FragmentHeader(
        round=frag.header.round,
        leader_pk=frag.header.leader_pk,
        h_prev=stale,
        salt=salt,
        digest=frag.header.digest,  # stale digest no longer matches the body
    )
    return Fragment(
        header=hdr,
        final_order=frag.final_order,
        batch=frag.batch,
        proof=frag.proof,
    )


@dataclass(frozen=True)
class MutationClass:
    name: str
    expected: RejectCode
    applicable: Callable[[Fragment], bool]
    apply: Callable[..., Fragment]


MUTATIONS: dict[str, MutationClass] = {
    m.name: m
    for m in [
        MutationClass("reorder_f", RejectCode.ORDER_MISMATCH, _reorder_f_ok, _reorder_f),
        MutationClass("drop_f_entry", RejectCode.STATE_MISMATCH, _drop_f_ok, _drop_f),
        MutationClass(
            "deflate_infix", RejectCode.NEGATIVE_HISTORY, _deflate_infix_ok, _deflate_infix
        ),
        MutationClass(
            "deflate_frontier",
            RejectCode.NEGATIVE_HISTORY,
            _deflate_frontier_ok,
            _deflate_frontier,
        ),
        MutationClass(
            "drop_frontier_row",
            RejectCode.FRONTIER_SIZE_MISMATCH,
            _drop_frontier_ok,
            _drop_frontier,
        ),
        MutationClass("flip_state", RejectCode.STATE_MISMATCH, _flip_state_ok, _flip_state),
        MutationClass("wrong_salt", RejectCode.BAD_SALT, _any_fragment, _wrong_salt),
        MutationClass(
            "stale_h_prev", RejectCode.BAD_DIGEST, _any_fragment, _stale_h_prev
        ),
    ]
}
