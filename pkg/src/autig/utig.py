"""The leader's persistent graph over unconfirmed transactions.

State is a tuple of vertex set, sparse cumulative pair weights, per-vertex
states and last-seen rounds, and an explicitly maintained directed edge set.
Weights are append-only and survive soft pruning, so a pruned transaction
reactivates in O(1) with its history intact. The per-round update touches
only pairs that received batch weight in the decided band plus pairs adjacent
to vertices whose state changed, which a from-scratch rebuild oracle checks
for exact equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NotPruned
from .localorder import LocalOrder
from .params import Thresholds, TxState, determine_state
from .predicate import PairOpCounter, orient_edge

TxId = bytes
Pair = tuple[bytes, bytes]


def count_batch_support(batch) -> dict[TxId, int]:
    """Per-transaction support: number of orders in the batch listing it."""
    support: dict[TxId, int] = {}
    for lo in batch:
        for tx in set(lo.txs):
            support[tx] = support.get(tx, 0) + 1
    return support


def count_batch_pair_weights(batch) -> dict[Pair, int]:
    """Directed pair weights: orders where u appears before v add one to (u,v).

    Repeated mentions of a tx within one order count once, at the first
    position, so the leader and any re-counting verifier agree byte for byte.
    """
    weights: dict[Pair, int] = {}
    for lo in batch:
        seq: list[TxId] = []
        seen: set[TxId] = set()
        for tx in lo.txs:
            if tx not in seen:
                seen.add(tx)
                seq.append(tx)
        for i, u in enumerate(seq):
            for v in seq[i + 1 :]:
                key = (u, v)
                weights[key] = weights.get(key, 0) + 1
    return weights


@dataclass
class PruneRecord:
    weights_retained: bool
    round: int


class Utig:
    """Mutable incremental dependency graph. Single writer at a time."""

    def __init__(self) -> None:
        self.states: dict[TxId, TxState] = {}
        self.weights: dict[Pair, int] = {}
        self.last_seen: dict[TxId, int] = {}
        self.out_edges: dict[TxId, set[TxId]] = {}
        self.in_edges: dict[TxId, set[TxId]] = {}
        self.pruned: dict[TxId, PruneRecord] = {}
        self.shaded_streak: dict[TxId, int] = {}
        self.committed: set[TxId] = set()
        self.pair_ops = PairOpCounter()

    # -- basic accessors ---------------------------------------------------

    @property
    def vertices(self):
        return self.states.keys()

    def weight(self, u: TxId, v: TxId) -> int:
        return self.weights.get((u, v), 0)

    def has_edge(self, u: TxId, v: TxId) -> bool:
        return v in self.out_edges.get(u, ())

    def edges(self) -> list[Pair]:
        return sorted((u, v) for u, vs in self.out_edges.items() for v in vs)

    def active_size(self) -> int:
        return len(self.states)

    # -- edge bookkeeping ----------------------------------------------------

    def _add_edge(self, u: TxId, v: TxId) -> None:
        self.out_edges.setdefault(u, set()).add(v)
        self.in_edges.setdefault(v, set()).add(u)

    def _remove_edge_pair(self, u: TxId, v: TxId) -> None:
        for a, b in ((u, v), (v, u)):
            outs = self.out_edges.get(a)
            if outs and b in outs:
                outs.discard(b)
                self.in_edges[b].discard(a)

    def _drop_incident_edges(self, tx: TxId) -> None:
        for v in list(self.out_edges.get(tx, ())):
            self.out_edges[tx].discard(v)
            self.in_edges[v].discard(tx)
        for u in list(self.in_edges.get(tx, ())):
            self.in_edges[tx].discard(u)
            self.out_edges[u].discard(tx)

    # -- the incremental round update ----------------------------------------

    def incremental_update(
        self, batch: tuple[LocalOrder, ...], round_: int, th: Thresholds
    ) -> tuple[set[TxId], set[Pair]]:
        """Apply one batch: states, append-only weights, affected edges.

        Returns (dirty_nodes, dirty_pairs). Dirty pairs are the batch-touched
        pairs whose stronger direction is at or above the edge threshold after
        the update; this covers first crossings and overtakes where both
        directions already cleared the threshold.
        """
        dirty_nodes: set[TxId] = set()
        dirty_pairs: set[Pair] = set()

        support = count_batch_support(batch)
        for tx in sorted(support):
            if tx in self.committed:
                # Finalized ids may still be listed by faulty replicas; they
                # never re-enter the active set.
                continue
            if tx in self.pruned:
                self._reactivate_internal(tx)
            old = self.states.get(tx, TxState.BLANK)
            new = determine_state(support[tx], th)
            self.states[tx] = new
            self.last_seen[tx] = round_
            if new != old:
                dirty_nodes.add(tx)

        batch_weights = count_batch_pair_weights(batch)
        touched: set[Pair] = set()
        for (u, v), w in batch_weights.items():
            self.weights[(u, v)] = self.weights.get((u, v), 0) + w
            touched.add((u, v) if u < v else (v, u))
        self.pair_ops.add(len(batch_weights))
        for u, v in touched:
            if max(self.weight(u, v), self.weight(v, u)) >= th.t_edge:
                dirty_pairs.add((u, v))

        # Vertices flipping to blank shed every incident edge immediately;
        # their remaining pairs need no re-orientation.
        for tx in sorted(dirty_nodes):
            if self.states[tx] == TxState.BLANK:
                self._drop_incident_edges(tx)

        nonblank = [t for t, s in self.states.items() if s != TxState.BLANK]
        affected: set[Pair] = set(dirty_pairs)
        for u in dirty_nodes:
            for v in nonblank:
                if u != v:
                    affected.add((u, v) if u < v else (v, u))

        for u, v in sorted(affected):
            self._remove_edge_pair(u, v)
            su = self.states.get(u, TxState.BLANK)
            sv = self.states.get(v, TxState.BLANK)
            if su == TxState.BLANK or sv == TxState.BLANK:
                continue
            self.pair_ops.add()
            oriented = orient_edge(u, v, self.weight(u, v), self.weight(v, u), th)
            if oriented is not None:
                self._add_edge(*oriented)

        return dirty_nodes, dirty_pairs

    # -- pruning ---------------------------------------------------------------

    def remove_committed(self, txids) -> None:
        """Hard-remove finalized transactions; drop committed-committed rows."""
        fresh = [t for t in txids if t not in self.committed]
        self.committed.update(fresh)
        for tx in fresh:
            self.states.pop(tx, None)
            self.pruned.pop(tx, None)
            self.shaded_streak.pop(tx, None)
            self._drop_incident_edges(tx)
            self.out_edges.pop(tx, None)
            self.in_edges.pop(tx, None)
        if fresh:
            dead = [
                pair
                for pair in self.weights
                if pair[0] in self.committed and pair[1] in self.committed
            ]
            for pair in dead:
                del self.weights[pair]

    def _soft_prune(self, tx: TxId, round_: int) -> None:
        self.states.pop(tx, None)
        self._drop_incident_edges(tx)
        self.out_edges.pop(tx, None)
        self.in_edges.pop(tx, None)
        self.pruned[tx] = PruneRecord(weights_retained=True, round=round_)

    def prune(
        self,
        anchor_index,
        topo: list[int],
        sccs: list[list[TxId]],
        horizon: int,
        committed,
        round_: int = 0,
    ) -> set[TxId]:
        """Apply the admissible pruning rules after extraction.

        Committed transactions are removed outright. Currently blank vertices
        and shaded vertices that sat strictly after the anchor for `horizon`
        consecutive extractions are soft-pruned: weights and last-seen rounds
        stay behind so reactivation is cheap and lossless.
        """
        removed: set[TxId] = set(committed)
        self.remove_committed(committed)

        post_anchor: set[TxId] = set()
        if anchor_index is not None:
            for pos in range(anchor_index + 1, len(topo)):
                post_anchor.update(sccs[topo[pos]])

        for tx in sorted(post_anchor):
            if self.states.get(tx) == TxState.SHADED:
                self.shaded_streak[tx] = self.shaded_streak.get(tx, 0) + 1
            else:
                self.shaded_streak.pop(tx, None)
        for tx in list(self.shaded_streak):
            if tx not in post_anchor:
                del self.shaded_streak[tx]

        for tx in sorted(self.states):
            if self.states[tx] == TxState.BLANK:
                self._soft_prune(tx, round_)
                removed.add(tx)
            elif (
                self.states[tx] == TxState.SHADED
                and self.shaded_streak.get(tx, 0) >= horizon
            ):
                self._soft_prune(tx, round_)
                self.shaded_streak.pop(tx, None)
                removed.add(tx)
        return removed

    def _reactivate_internal(self, tx: TxId) -> None:
        del self.pruned[tx]
        self.states[tx] = TxState.BLANK

    def reactivate(self, tx: TxId, round_: int) -> None:
        """Return a soft-pruned transaction to the active set."""
        if tx not in self.pruned:
            raise NotPruned(f"{tx.hex()[:16]} is not soft-pruned")
        self._reactivate_internal(tx)
        self.last_seen[tx] = round_

    # -- diagnostics -------------------------------------------------------------

    def debug_dump(self) -> str:
        lines = []
        for tx in sorted(self.states):
            lines.append(f"V {tx.hex()} {self.states[tx].name} r={self.last_seen[tx]}")
        for (u, v) in sorted(self.weights):
            lines.append(f"W {u.hex()} {v.hex()} {self.weights[(u, v)]}")
        for u, v in self.edges():
            lines.append(f"E {u.hex()} {v.hex()}")
        return "\n".join(lines) + "\n"


def rebuild_from_scratch(all_batches, th: Thresholds) -> Utig:
    """Recompute the graph from every batch in round order.

    Weights are full cross-round sums, each vertex keeps the state from the
    last batch that listed it, and edges are re-derived by evaluating the
    orientation predicate on every non-blank pair. Serves as the equality
    oracle for the incremental update.
    """
    g = Utig()
    for round_, batch in all_batches:
        support = count_batch_support(batch)
        for tx in sorted(support):
            g.states[tx] = determine_state(support[tx], th)
            g.last_seen[tx] = round_
        batch_weights = count_batch_pair_weights(batch)
        g.pair_ops.add(len(batch_weights))
        for (u, v), w in batch_weights.items():
            g.weights[(u, v)] = g.weights.get((u, v), 0) + w
    nonblank = sorted(t for t, s in g.states.items() if s != TxState.BLANK)
    for i, u in enumerate(nonblank):
        for v in nonblank[i + 1 :]:
            g.pair_ops.add()
            oriented = orient_edge(u, v, g.weight(u, v), g.weight(v, u), th)
            if oriented is not None:
                g._add_edge(*oriented)
    return g


def graphs_equal(a: Utig, b: Utig) -> bool:
    """Structural equality of vertex set, states, last-seen, weights, edges."""
    return (
        a.states == b.states
        and a.last_seen == b.last_seen
        and a.weights == b.weights
        and a.edges() == b.edges()
    )
