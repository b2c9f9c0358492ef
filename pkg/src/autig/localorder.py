"""Replica mempool, local order construction, and leader-side admission.

A local order is a replica's signed, round-tagged report of transaction ids.
The replica fills it with fresh (never reported) arrivals in arrival order,
then tops it up with previously reported but unfinalized transactions so old
precedence evidence keeps flowing until it is finalized. The leader admits at
most one valid order per replica per round and, once a quorum is available,
selects the batch deterministically by ascending pubkey so message timing
cannot bias batch membership.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from math import ceil

from .crypto import SignatureScheme
from .encoding import Reader, encode_bytes32, encode_u32, encode_u64, encode_var_bytes
from .errors import NotEnoughOrders, ParseError
from .params import ProtocolParams, ReplicaId

TxId = bytes


@dataclass(frozen=True)
class LocalOrder:
    replica: ReplicaId
    round: int
    txs: tuple[TxId, ...]
    signature: bytes


def encode_replica(replica: ReplicaId) -> bytes:
    return encode_u64(replica.index) + encode_var_bytes(replica.pubkey)


def decode_replica(r: Reader) -> ReplicaId:
    return ReplicaId(index=r.u64(), pubkey=r.var_bytes())


def local_order_signing_bytes(replica: ReplicaId, round_: int, txs: tuple[TxId, ...]) -> bytes:
    out = [encode_replica(replica), encode_u64(round_), encode_u32(len(txs))]
    out.extend(encode_bytes32(t) for t in txs)
    return b"".join(out)


def encode_local_order(lo: LocalOrder) -> bytes:
    return local_order_signing_bytes(lo.replica, lo.round, lo.txs) + encode_var_bytes(
        lo.signature
    )


def decode_local_order(r: Reader) -> LocalOrder:
    replica = decode_replica(r)
    round_ = r.u64()
    count = r.u32()
    txs = tuple(r.bytes32() for _ in range(count))
    sig = r.var_bytes()
    return LocalOrder(replica=replica, round=round_, txs=txs, signature=sig)


def make_local_order(
    replica: ReplicaId,
    secret: bytes,
    scheme: SignatureScheme,
    round_: int,
    txs: tuple[TxId, ...],
) -> LocalOrder:
    sig = scheme.sign(secret, local_order_signing_bytes(replica, round_, txs))
    return LocalOrder(replica=replica, round=round_, txs=txs, signature=sig)


def local_order_signature_valid(lo: LocalOrder, scheme: SignatureScheme) -> bool:
    msg = local_order_signing_bytes(lo.replica, lo.round, lo.txs)
    return scheme.verify(lo.replica.pubkey, msg, lo.signature)


class Mempool:
    """Single-writer arrival log for one simulated replica.

    Tracks arrival order, which transactions are still unreported, and a
    rotating resubmission queue of reported-but-unfinalized transactions.
    Finalized transactions are never reported again.
    """

    def __init__(self) -> None:
        self.arrivals: list[tuple[TxId, float]] = []
        self._known: set[TxId] = set()
        self.finalized: set[TxId] = set()
        self.unreported: deque[TxId] = deque()
        self.resubmit_queue: deque[TxId] = deque()
        self._queued: set[TxId] = set()

    def on_arrival(self, txid: TxId, when: float) -> None:
        if txid in self._known:
            return
        self._known.add(txid)
        self.arrivals.append((txid, when))
        if txid not in self.finalized:
            self.unreported.append(txid)

    def on_finalized(self, txids) -> None:
        for t in txids:
            self.finalized.add(t)
            self._queued.discard(t)
        # Lazy removal from the deques happens on pop.

    def next_fresh(self, cap: int) -> list[TxId]:
        out: list[TxId] = []
        while self.unreported and len(out) < cap:
            t = self.unreported.popleft()
            if t in self.finalized:
                continue
            out.append(t)
        return out

    def next_resubmits(self, cap: int, exclude: set[TxId]) -> list[TxId]:
        out: list[TxId] = []
        scanned = 0
        limit = len(self.resubmit_queue)
        while self.resubmit_queue and len(out) < cap and scanned < limit:
            scanned += 1
            t = self.resubmit_queue.popleft()
            if t in self.finalized:
                self._queued.discard(t)
                continue
            if t in exclude:
                self.resubmit_queue.append(t)
                continue
            out.append(t)
        return out

    def mark_reported(self, txids) -> None:
        """Move reported txs to the tail of the resubmission rotation."""
        for t in txids:
            if t in self.finalized:
                continue
            if t in self._queued:
                self.resubmit_queue.append(t)  # already queued ids were popped
            else:
                self._queued.add(t)
                self.resubmit_queue.append(t)

    def pending_unfinalized(self) -> list[TxId]:
        """All known unfinalized txs in arrival order (recovery replies)."""
        return [t for t, _ in self.arrivals if t not in self.finalized]


def build_local_order(
    mempool: Mempool,
    replica: ReplicaId,
    secret: bytes,
    scheme: SignatureScheme,
    round_: int,
    lo_size: int,
    resubmit_fraction: float,
) -> LocalOrder:
    """Assemble and sign this replica's order for the round.

    Fresh arrivals fill up to ceil(lo_size * (1 - resubmit_fraction)) slots in
    arrival order; the remaining capacity is topped up from the resubmission
    rotation, least recently resubmitted first.
    """
    if lo_size < 1:
        raise ValueError("lo_size must be >= 1")
    fresh_cap = ceil(lo_size * (1.0 - resubmit_fraction))
    fresh = mempool.next_fresh(min(fresh_cap, lo_size))
    resub = mempool.next_resubmits(lo_size - len(fresh), exclude=set(fresh))
    txs = tuple(fresh + resub)
    mempool.mark_reported(txs)
    return make_local_order(replica, secret, scheme, round_, txs)


class RejectReason(enum.Enum):
    BAD_SIGNATURE = "BadSignature"
    WRONG_ROUND = "WrongRound"
    DUPLICATE = "Duplicate"


def admit_local_order(
    lo: LocalOrder,
    round_: int,
    seen: set[bytes],
    scheme: SignatureScheme,
) -> RejectReason | None:
    """Admission check; returns None on accept and records the replica in seen."""
    if not local_order_signature_valid(lo, scheme):
        return RejectReason.BAD_SIGNATURE
    if lo.round != round_:
        return RejectReason.WRONG_ROUND
    if lo.replica.pubkey in seen:
        return RejectReason.DUPLICATE
    seen.add(lo.replica.pubkey)
    return None


def select_batch(
    admitted: list[LocalOrder], params: ProtocolParams
) -> tuple[list[LocalOrder], list[LocalOrder]]:
    """Pick exactly n - f orders by ascending pubkey; defer the remainder."""
    quorum = params.batch_size
    if len(admitted) < quorum:
        raise NotEnoughOrders(f"have {len(admitted)} orders, need {quorum}")
    ranked = sorted(admitted, key=lambda lo: lo.replica.pubkey)
    return ranked[:quorum], ranked[quorum:]
