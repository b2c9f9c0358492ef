"""Replica role state machines: leader rounds, voting, commit, handoff.

These objects are transport-free; a driver (the simulator or a test harness)
feeds them messages and relays what they emit. The leader runs the four-stage
round: admit orders, select the batch, fold it into the graph, extract and
prove, then self-verify the assembled fragment before signing. Self-
verification guards the one divergence the update rules permit: a transaction
absent from the current batch keeps its last classification in the graph, so
it can reach the prefix while a stateless verifier would recompute it as
blank. Such rounds withhold the proposal; resubmission refreshes the state
within a round or two and the prefix resumes growing.

The commit oracle stands in for the downstream consensus layer: a fragment
commits once n - f distinct replicas have signed its digest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import DEFAULT_HASH, SignatureScheme, compute_salt
from .errors import (
    DigestMismatch,
    InvalidAnchorFragment,
    NotEnoughOrders,
    NotEnoughReplies,
)
from .extract import ExtractionResult, extract_and_prove
from .fragments import Fragment, FragmentHeader, OrderFault, compute_fragment_digest
from .localorder import (
    LocalOrder,
    RejectReason,
    admit_local_order,
    local_order_signature_valid,
    select_batch,
)
from .params import ProtocolParams, ReplicaId, Thresholds, TxState, determine_state
from .predicate import PairOpCounter, orient_edge
from .utig import Utig, count_batch_pair_weights, count_batch_support
from .verify import verify_fragment

TxId = bytes

GENESIS_DIGEST = b"\x00" * 32

# Round tag namespace for recovery replies; ordinary rounds stay far below.
RECOVERY_ROUND_BASE = 1 << 60


def recovery_round_marker(epoch: int) -> int:
    return RECOVERY_ROUND_BASE + epoch


@dataclass
class LeaderRoundOutcome:
    fragment: Fragment | None
    extraction: ExtractionResult | None
    reason: str  # "proposed" | "no-anchor" | "withheld-stale"
    leader_sig: bytes | None = None


class OrderLeader:
    """Stateful ordering engine for the current epoch's leader."""

    def __init__(
        self,
        replica: ReplicaId,
        secret: bytes,
        params: ProtocolParams,
        th: Thresholds,
        scheme: SignatureScheme,
        hashfn=DEFAULT_HASH,
        graph: Utig | None = None,
        h_prev: bytes = GENESIS_DIGEST,
    ):
        self.replica = replica
        self.secret = secret
        self.params = params
        self.th = th
        self.scheme = scheme
        self.hashfn = hashfn
        self.graph = graph if graph is not None else Utig()
        self.h_prev = h_prev
        self.admitted: list[LocalOrder] = []
        self._seen: set[bytes] = set()
        self.round = 0
        self.extract_ops = PairOpCounter()
        self.last_extraction: ExtractionResult | None = None
        self.last_batch: tuple[LocalOrder, ...] = ()
        self.pre_round_weights: dict[int, dict] = {}

    def begin_round(self, round_: int) -> None:
        self.round = round_
        self.admitted = []
        self._seen = set()

    def submit_order(self, lo: LocalOrder) -> RejectReason | None:
        reason = admit_local_order(lo, self.round, self._seen, self.scheme)
        if reason is None:
            self.admitted.append(lo)
        return reason

    def have_quorum(self) -> bool:
        return len(self.admitted) >= self.params.batch_size

    def finish_round(self) -> LeaderRoundOutcome:
        """Select the batch, update the graph, extract, prove, self-check."""
        batch_list, _deferred = select_batch(self.admitted, self.params)
        batch = tuple(batch_list)
        self.last_batch = batch

        # Keep the pre-round weight view of recent rounds so recovery tests
        # can compare reconstructed history against the deposed leader.
        self.pre_round_weights[self.round] = dict(self.graph.weights)
        for stale in sorted(self.pre_round_weights):
            if stale < self.round - 4:
                del self.pre_round_weights[stale]

        self.graph.incremental_update(batch, self.round, self.th)
        salt = compute_salt(self.h_prev, self.round, self.replica.pubkey, self.hashfn)
        self.extract_ops.reset()
        result = extract_and_prove(
            self.graph, batch, salt, self.th, self.extract_ops, self.hashfn
        )
        self.last_extraction = result
        if result.empty:
            return LeaderRoundOutcome(None, result, "no-anchor")

        digest = compute_fragment_digest(
            result.final_order, batch, result.proof, self.h_prev, self.hashfn
        )
        hdr = FragmentHeader(
            round=self.round,
            leader_pk=self.replica.pubkey,
            h_prev=self.h_prev,
            salt=salt,
            digest=digest,
        )
        frag = Fragment(
            header=hdr, final_order=result.final_order, batch=batch, proof=result.proof
        )
        if verify_fragment(frag, self.params, self.th, self.scheme, hashfn=self.hashfn):
            return LeaderRoundOutcome(None, result, "withheld-stale")
        sig = self.scheme.sign(self.secret, digest)
        return LeaderRoundOutcome(frag, result, "proposed", leader_sig=sig)

    def on_committed(self, frag: Fragment, prune_horizon: int | None) -> None:
        """Fold a commit back into the graph; soft rules only when enabled."""
        self.h_prev = frag.header.digest
        result = self.last_extraction
        if prune_horizon is not None and result is not None:
            self.graph.prune(
                result.anchor_index,
                result.topo,
                result.sccs,
                prune_horizon,
                frag.final_order,
                round_=self.round,
            )
        else:
            self.graph.remove_committed(frag.final_order)


def leader_round(
    leader: OrderLeader, incoming_orders, round_: int
) -> LeaderRoundOutcome:
    """One-shot convenience: admit everything, then finish the round."""
    leader.begin_round(round_)
    for lo in incoming_orders:
        leader.submit_order(lo)
    if not leader.have_quorum():
        raise NotEnoughOrders(
            f"{len(leader.admitted)} admissible orders, need {leader.params.batch_size}"
        )
    return leader.finish_round()


@dataclass
class CommitRecord:
    h_f: bytes
    round: int
    votes: set[bytes] = field(default_factory=set)
    committed_at: float | None = None

    def committed(self, quorum: int) -> bool:
        return len(self.votes) >= quorum


class CommitTracker:
    """Quorum accounting over fragment digests (the simulated consensus)."""

    def __init__(self, params: ProtocolParams, scheme: SignatureScheme):
        self.params = params
        self.scheme = scheme
        self.records: dict[bytes, CommitRecord] = {}

    def add_vote(
        self, h_f: bytes, round_: int, voter: ReplicaId, sig: bytes, now: float
    ) -> CommitRecord | None:
        """Count a vote; returns the record the first time it reaches quorum."""
        if not self.scheme.verify(voter.pubkey, h_f, sig):
            return None
        rec = self.records.setdefault(h_f, CommitRecord(h_f=h_f, round=round_))
        already = rec.committed(self.params.batch_size)
        rec.votes.add(voter.pubkey)
        if not already and rec.committed(self.params.batch_size):
            rec.committed_at = now
            return rec
        return None


class FaultTracker:
    """Collects order faults per digest until the handoff threshold."""

    def __init__(self, params: ProtocolParams):
        self.params = params
        self.accusers: dict[bytes, set[bytes]] = {}

    def add(self, fault: OrderFault) -> bool:
        """True when this fault pushes the digest to f + 1 distinct accusers."""
        acc = self.accusers.setdefault(fault.h_f, set())
        before = len(acc)
        acc.add(fault.accuser.pubkey)
        return before <= self.params.f < len(acc)


def handoff_successor(current_index: int, n: int) -> int:
    return (current_index + 1) % n


def init_utig_from_fragment(
    frag: Fragment,
    params: ProtocolParams,
    th: Thresholds,
    scheme: SignatureScheme,
    committed_digest: bytes,
    hashfn=DEFAULT_HASH,
) -> Utig:
    """Rebuild a graph skeleton from a committed anchor fragment.

    Historical weights are exact: asserted totals minus the anchor batch's
    recomputed contribution. Only anchor-prefix members become vertices; every
    other transaction re-enters through the recovery batch with its retained
    pair history.
    """
    if frag.header.digest != committed_digest:
        raise DigestMismatch("anchor fragment digest does not match the commit log")
    if verify_fragment(frag, params, th, scheme, hashfn=hashfn) is not None:
        raise InvalidAnchorFragment("anchor fragment fails verification")
    assert frag.proof is not None
    g = Utig()
    batch_weights = count_batch_pair_weights(frag.batch)
    for tx in frag.final_order:
        g.states[tx] = frag.proof.states[tx]
        g.last_seen[tx] = frag.header.round
    for table in (frag.proof.infix, frag.proof.frontier):
        for (a, b), (w_ab, w_ba) in table.items():
            for u, v, w in ((a, b, w_ab), (b, a, w_ba)):
                hist = w - batch_weights.get((u, v), 0)
                if hist > 0:
                    g.weights[(u, v)] = hist
    in_f = sorted(frag.final_order)
    for i, u in enumerate(in_f):
        for v in in_f[i + 1 :]:
            if g.states[u] == TxState.BLANK or g.states[v] == TxState.BLANK:
                continue
            oriented = orient_edge(u, v, g.weight(u, v), g.weight(v, u), th)
            if oriented is not None:
                g._add_edge(*oriented)
    return g


@dataclass(frozen=True)
class RecoveryReply:
    replica: ReplicaId
    epoch: int
    local_order: LocalOrder
    signature: bytes


def recovery_reply_signing_bytes(replica: ReplicaId, epoch: int, lo: LocalOrder) -> bytes:
    from .encoding import encode_u64
    from .localorder import encode_local_order, encode_replica

    return encode_replica(replica) + encode_u64(epoch) + encode_local_order(lo)


def make_recovery_reply(
    replica: ReplicaId,
    secret: bytes,
    scheme: SignatureScheme,
    epoch: int,
    pending: list[TxId],
) -> RecoveryReply:
    from .localorder import make_local_order

    lo = make_local_order(
        replica, secret, scheme, recovery_round_marker(epoch), tuple(pending)
    )
    sig = scheme.sign(secret, recovery_reply_signing_bytes(replica, epoch, lo))
    return RecoveryReply(replica=replica, epoch=epoch, local_order=lo, signature=sig)


def admit_recovery_replies(
    replies,
    epoch: int,
    params: ProtocolParams,
    scheme: SignatureScheme,
) -> list[RecoveryReply]:
    """Filter malformed, duplicate, and cross-epoch replies."""
    seen: set[bytes] = set()
    admitted: list[RecoveryReply] = []
    for rep in replies:
        if rep.epoch != epoch:
            continue
        if rep.replica.pubkey in seen:
            continue
        if rep.local_order.round != recovery_round_marker(epoch):
            continue
        if not local_order_signature_valid(rep.local_order, scheme):
            continue
        if not scheme.verify(
            rep.replica.pubkey,
            recovery_reply_signing_bytes(rep.replica, rep.epoch, rep.local_order),
            rep.signature,
        ):
            continue
        seen.add(rep.replica.pubkey)
        admitted.append(rep)
    return admitted


def recovery_round(
    leader: OrderLeader, replies, epoch: int, round_: int
) -> None:
    """Aggregate admissible replies into one recovery batch and apply it."""
    admitted = admit_recovery_replies(replies, epoch, leader.params, leader.scheme)
    if len(admitted) < leader.params.batch_size:
        raise NotEnoughReplies(
            f"{len(admitted)} admissible replies, need {leader.params.batch_size}"
        )
    ranked = sorted(admitted, key=lambda r: r.replica.pubkey)
    batch = tuple(r.local_order for r in ranked[: leader.params.batch_size])
    leader.graph.incremental_update(batch, round_, leader.th)
