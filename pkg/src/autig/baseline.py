"""Symmetric full-recomputation baseline in two flavors.

Cumulative mode rebuilds the whole dependency graph from every collected
batch each round, runs the same extraction and emission rules, and produces
byte-identical fragments to the incremental engine on the same inputs; it is
the system-level equivalence oracle and the cost model for symmetric
verification. Per-round mode builds the graph from the current batch only, so
pairs lacking edge-threshold support within one round stay unfinalized and
re-enter through replica resubmission; it exists to measure that multi-round
deferral when per-round co-visibility is thin. The deferral model stands in
for the prior art's separate update messages, an intentional simplification.

In both modes follower verification repeats the leader's computation, so the
follower cost counter equals the leader's by construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .crypto import DEFAULT_HASH, compute_salt
from .extract import extract_and_prove, extract_prefix
from .fragments import Fragment, FragmentHeader, compute_fragment_digest
from .localorder import LocalOrder
from .params import ProtocolParams, Thresholds, TxState, determine_state
from .predicate import PairOpCounter
from .protocol import GENESIS_DIGEST
from .utig import count_batch_support, rebuild_from_scratch

TxId = bytes


class BaselineMode(enum.Enum):
    CUMULATIVE = "cumulative"
    PER_ROUND = "per-round"


@dataclass
class BaselineRoundOutcome:
    fragment: Fragment | None
    blocks: tuple[tuple[TxId, ...], ...]
    reason: str
    round_ops: int

    @property
    def digest(self) -> bytes | None:
        return self.fragment.header.digest if self.fragment else None


class BaselineEngine:
    """Leader-side engine; followers re-run the identical computation."""

    def __init__(
        self,
        leader_pk: bytes,
        params: ProtocolParams,
        th: Thresholds,
        mode: BaselineMode,
        hashfn=DEFAULT_HASH,
    ):
        self.leader_pk = leader_pk
        self.params = params
        self.th = th
        self.mode = mode
        self.hashfn = hashfn
        self.batches: list[tuple[int, tuple[LocalOrder, ...]]] = []
        self.committed: set[TxId] = set()
        self.h_prev = GENESIS_DIGEST
        self.total_ops = 0

    def round(self, batch: tuple[LocalOrder, ...], round_: int) -> BaselineRoundOutcome:
        """Full recomputation for one round, then extraction and proposal."""
        if self.mode is BaselineMode.CUMULATIVE:
            self.batches.append((round_, batch))
            history = self.batches
        else:
            history = [(round_, batch)]

        graph = rebuild_from_scratch(history, self.th)
        graph.remove_committed(self.committed)
        salt = compute_salt(self.h_prev, round_, self.leader_pk, self.hashfn)

        if self.mode is BaselineMode.CUMULATIVE:
            counter = PairOpCounter()
            result = extract_and_prove(graph, batch, salt, self.th, counter, self.hashfn)
            round_ops = graph.pair_ops.count + counter.count
        else:
            result = extract_prefix(graph, salt, self.th, self.hashfn)
            round_ops = graph.pair_ops.count
        self.total_ops += round_ops

        if not result.final_order:
            return BaselineRoundOutcome(None, (), "no-anchor", round_ops)

        if self.mode is BaselineMode.CUMULATIVE:
            # Same emission rule as the incremental engine: a prefix whose
            # asserted states would not recompute from this batch is withheld.
            support = count_batch_support(batch)
            stale = any(
                determine_state(support.get(tx, 0), self.th) != graph.states[tx]
                for tx in result.final_order
            )
            if stale:
                return BaselineRoundOutcome(None, (), "withheld-stale", round_ops)

        digest = compute_fragment_digest(
            result.final_order, batch, result.proof, self.h_prev, self.hashfn
        )
        hdr = FragmentHeader(
            round=round_,
            leader_pk=self.leader_pk,
            h_prev=self.h_prev,
            salt=salt,
            digest=digest,
        )
        frag = Fragment(
            header=hdr,
            final_order=result.final_order,
            batch=batch,
            proof=result.proof,
        )
        return BaselineRoundOutcome(frag, result.blocks, "proposed", round_ops)

    def on_committed(self, frag: Fragment) -> None:
        self.h_prev = frag.header.digest
        self.committed.update(frag.final_order)


def reexecute_for_follower(
    batches,
    committed: set[TxId],
    batch: tuple[LocalOrder, ...],
    round_: int,
    th: Thresholds,
    salt: bytes,
    mode: BaselineMode,
    hashfn=DEFAULT_HASH,
):
    """Follower-side symmetric re-execution; returns (final_order, ops).

    Demonstrates that follower work replicates the leader's recomputation and
    lands on the same order; the simulator charges this cost by symmetry
    instead of re-running it.
    """
    history = list(batches) if mode is BaselineMode.CUMULATIVE else [(round_, batch)]
    graph = rebuild_from_scratch(history, th)
    graph.remove_committed(committed)
    if mode is BaselineMode.CUMULATIVE:
        counter = PairOpCounter()
        result = extract_and_prove(graph, batch, salt, th, counter, hashfn)
        return result.final_order, graph.pair_ops.count + counter.count
    result = extract_prefix(graph, salt, th, hashfn)
    return result.final_order, graph.pair_ops.count
