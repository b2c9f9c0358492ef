"""Deterministic discrete-event simulation of the ordering service.

One event loop drives client arrivals, replica order emission, leader rounds,
voting, commits, fault detection, and leader handoff under partial synchrony:
before the stabilization time messages may be delayed adversarially up to
GST + delta, afterwards delays are seeded-uniform in [1, delta]. Channels are
FIFO so a commit notice never overtakes the next round announcement from the
same sender; commit notices that cross a leader change are buffered until
their predecessor lands. Every source of randomness is a named stream derived
from the scenario seed and all order-sensitive iteration is sorted, so a
scenario and seed reproduce byte-identical commit logs and metrics across
process invocations.

Ground-truth receive timelines are recorded for every replica, including
Byzantine ones that lie on the wire; the post-run fairness audit consumes
those timelines, since the fairness definition quantifies over what replicas
actually observed.
"""

from __future__ import annotations

import enum
import heapq
import json
import random
from dataclasses import dataclass, field

from .audit import FairnessViolation, fairness_audit
from .baseline import BaselineEngine, BaselineMode
from .crypto import MAC_SCHEME, SignatureScheme, tx_digest
from .encoding import encode_u64
from .errors import ConfigError
from .fragments import Fragment, OrderFault, encode_proof
from .localorder import (
    LocalOrder,
    Mempool,
    build_local_order,
    make_local_order,
    select_batch,
)
from .params import ProtocolParams, ReplicaId, derive_thresholds
from .predicate import PairOpCounter
from .protocol import (
    GENESIS_DIGEST,
    CommitTracker,
    FaultTracker,
    OrderLeader,
    admit_recovery_replies,
    handoff_successor,
    init_utig_from_fragment,
    make_recovery_reply,
    recovery_round,
)
from .verify import make_order_fault, order_fault_valid, verify_fragment

TxId = bytes

PROTOCOLS = ("autig", "themis-cumulative", "themis-per-round")


class ByzBehavior(enum.Enum):
    SILENT = "silent"
    LIE_REVERSE = "lie_reverse"
    EQUIVOCATE = "equivocate"
    DELAY_MAX = "delay_max"


@dataclass(frozen=True)
class Scenario:
    scenario_id: str = "run"
    protocol: str = "autig"
    n: int = 5
    f: int = 1
    gamma: float = 1.0
    strict_bound: bool = True
    tx_rate: float = 200.0
    lo_size: int = 50
    lo_interval_ms: float = 250.0
    duration_ms: float = 5000.0
    seed: int = 0
    gst_ms: float = 0.0
    delta_ms: float = 40.0
    arrival_jitter_ms: float = 20.0
    byzantine: tuple[tuple[int, str], ...] = ()
    leader_mutation: tuple[int, str] | None = None
    prune_horizon: int | None = 3
    resubmit_fraction: float = 0.25
    drain_max_rounds: int = 200
    junk_order_size: int = 0  # novel ids per equivocator order, grows the graph
    scripted_arrivals: tuple[tuple[float, int, bytes], ...] = ()

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if len(self.byzantine) > self.f:
            raise ConfigError("more Byzantine replicas than the fault bound")
        for idx, behavior in self.byzantine:
            if not (0 <= idx < self.n):
                raise ConfigError(f"byzantine index {idx} out of range")
            if idx == 0:
                raise ConfigError("replica 0 is the initial leader and must be correct")
            try:
                ByzBehavior(behavior)
            except ValueError:
                raise ConfigError(f"unknown byzantine behavior {behavior!r}") from None
        if len({i for i, _ in self.byzantine}) != len(self.byzantine):
            raise ConfigError("duplicate byzantine replica index")
        if self.lo_size < 1 or self.duration_ms <= 0 or self.lo_interval_ms <= 0:
            raise ConfigError("lo_size, duration and lo_interval must be positive")
        if not (0.0 <= self.resubmit_fraction < 1.0):
            raise ConfigError("resubmit_fraction must be in [0, 1)")
        if self.leader_mutation is not None and self.protocol != "autig":
            raise ConfigError("leader mutations only apply to the autig protocol")

    def params(self) -> ProtocolParams:
        return ProtocolParams(
            n=self.n, f=self.f, gamma=self.gamma, strict_bound=self.strict_bound
        )


@dataclass
class Metrics:
    committed_tps: float = 0.0
    p50_latency_ms: float = 0.0
    p99_latency_ms: float = 0.0
    mean_btf: float = 0.0
    max_btf: int = 0
    mean_proof_bytes: float = 0.0
    leader_ops: int = 0
    follower_ops: int = 0
    violations: int = 0
    handoffs: int = 0
    committed_count: int = 0
    rounds: int = 0
    latencies_ms: list[float] = field(default_factory=list, repr=False)

    def csv_values(self) -> list[str]:
        return [
            f"{self.committed_tps:.3f}",
            f"{self.p50_latency_ms:.3f}",
            f"{self.p99_latency_ms:.3f}",
            f"{self.mean_btf:.4f}",
            str(self.max_btf),
            f"{self.mean_proof_bytes:.1f}",
            str(self.leader_ops),
            str(self.follower_ops),
            str(self.violations),
            str(self.handoffs),
        ]


@dataclass
class RoundRecord:
    round: int
    outcome: str
    batch_txs: int = 0
    proof_bytes: int = 0
    follower_ops: int = 0
    leader_ops: int = 0
    active_graph: int = 0
    f_len: int = 0


@dataclass
class RunResult:
    scenario: Scenario
    metrics: Metrics
    commit_log: str
    committed_blocks: list[tuple[TxId, ...]]
    violations: list[FairnessViolation]
    round_records: list[RoundRecord]
    timelines: list[list[TxId]]
    committed_fragments: list[Fragment]
    safety_ok: bool
    uncommitted_eligible: int
    btf_by_tx: dict[TxId, int]
    recovery_debug: dict | None = None
    deposed_pre_anchor_weights: dict | None = None


class _Replica:
    """Simulation-side per-replica state."""

    def __init__(self, index: int, scheme: SignatureScheme, params: ProtocolParams):
        seed = b"replica-%d" % index
        self.secret, pubkey = scheme.keypair(seed)
        self.id = ReplicaId(index=index, pubkey=pubkey)
        self.mempool = Mempool()
        self.timeline: list[TxId] = []
        self.arrival_time: dict[TxId, float] = {}
        self.behavior: ByzBehavior | None = None
        self.epoch = 0
        self.known_round = 0
        self.last_committed_digest = GENESIS_DIGEST
        self.committed_flat: list[TxId] = []
        self.stored_fragments: dict[bytes, Fragment] = {}
        self.voted_digests: set[bytes] = set()
        self.fault_tracker = FaultTracker(params)
        self.handoffs_seen: set[bytes] = set()
        self.pending_commits: dict[bytes, Fragment] = {}  # keyed by h_prev

    @property
    def correct(self) -> bool:
        return self.behavior is None


class Simulator:
    def __init__(self, scenario: Scenario, scheme: SignatureScheme = MAC_SCHEME):
        scenario.validate()
        self.sc = scenario
        self.scheme = scheme
        try:
            self.params = scenario.params()
            self.th = derive_thresholds(self.params)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(str(exc)) from exc

        self.now = 0.0
        self._seq = 0
        self._queue: list = []
        self._channel_clock: dict[tuple[int, int], float] = {}

        base = f"{scenario.seed}:{scenario.scenario_id}"
        self.rng_arrivals = random.Random(f"{base}:arrivals")
        self.rng_net = random.Random(f"{base}:net")
        self.rng_jitter = random.Random(f"{base}:jitter")
        self.rng_byz = random.Random(f"{base}:byz")

        self.replicas = [_Replica(i, scheme, self.params) for i in range(scenario.n)]
        for idx, behavior in scenario.byzantine:
            self.replicas[idx].behavior = ByzBehavior(behavior)

        self.epoch = 0
        self.leader_index = 0
        self.leader = OrderLeader(
            self.replicas[0].id, self.replicas[0].secret, self.params, self.th, scheme
        )
        self.engine: BaselineEngine | None = None
        if scenario.protocol == "themis-cumulative":
            self.engine = BaselineEngine(
                self.replicas[0].id.pubkey, self.params, self.th, BaselineMode.CUMULATIVE
            )
        elif scenario.protocol == "themis-per-round":
            self.engine = BaselineEngine(
                self.replicas[0].id.pubkey, self.params, self.th, BaselineMode.PER_ROUND
            )

        self.commit_tracker = CommitTracker(self.params, scheme)
        self.round = 0
        self.round_open = False
        self.round_started_at = 0.0
        self.round_check_at = 0.0
        self.current_fragment: Fragment | None = None
        self.current_blocks: tuple[tuple[TxId, ...], ...] = ()
        self.mutation_pending = scenario.leader_mutation is not None
        self.leader_active = True

        self.rounds_after_duration = 0
        self.tx_counter = 0
        self.submit_time: dict[TxId, float] = {}
        self.first_correct_arrival: dict[TxId, float] = {}
        self.eligible: set[TxId] = set()
        self._correct_deliveries: dict[TxId, int] = {}
        self.committed_global: set[TxId] = set()
        self.first_batched_round: dict[TxId, int] = {}
        self.btf_by_tx: dict[TxId, int] = {}
        self.commit_times: dict[TxId, float] = {}
        self.committed_blocks: list[tuple[TxId, ...]] = []
        self.committed_fragments: list[Fragment] = []
        self.commit_log_lines: list[str] = []
        self.round_records: list[RoundRecord] = []
        self.handoffs = 0
        self.leader_ops_total = 0
        self.follower_ops_total = 0
        self.proof_bytes: list[int] = []
        self.follower_counter_index: int | None = None
        self.recovery_debug: dict | None = None
        self.deposed_pre_anchor_weights: dict | None = None
        self._recovery_replies: list = []
        self._in_recovery = False
        self._ended = False

    # -- event machinery -----------------------------------------------------

    def _push(self, when: float, fn, *args) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (when, self._seq, fn, args))

    def _send(self, src: int, dst: int, fn, extra_delay: float = 0.0) -> None:
        if self.now >= self.sc.gst_ms:
            delay = self.rng_net.uniform(1.0, self.sc.delta_ms)
        else:
            delay = self.rng_net.uniform(
                1.0, (self.sc.gst_ms - self.now) + self.sc.delta_ms
            )
        when = self.now + delay + extra_delay
        chan = (src, dst)
        when = max(when, self._channel_clock.get(chan, 0.0))
        self._channel_clock[chan] = when
        self._push(when, fn)

    def _broadcast(self, src: int, fn_for) -> None:
        for rep in self.replicas:
            if rep.id.index != src:
                self._send(src, rep.id.index, fn_for(rep.id.index))

    # -- workload --------------------------------------------------------------

    def _new_txid(self) -> TxId:
        self.tx_counter += 1
        return tx_digest(b"tx:" + encode_u64(self.sc.seed) + encode_u64(self.tx_counter))

    def _schedule_arrivals(self) -> None:
        rate_per_ms = self.sc.tx_rate / 1000.0
        t = 0.0
        while rate_per_ms > 0:
            t += self.rng_arrivals.expovariate(rate_per_ms)
            if t >= self.sc.duration_ms:
                break
            txid = self._new_txid()
            self.submit_time[txid] = t
            for rep in self.replicas:
                jit = self.rng_jitter.uniform(0.0, self.sc.arrival_jitter_ms)
                self._push(t + jit, self._deliver_tx, rep.id.index, txid)
        first_seen: dict[TxId, float] = {}
        for when, idx, txid in self.sc.scripted_arrivals:
            first_seen[txid] = min(first_seen.get(txid, when), when)
            self._push(when, self._deliver_tx, idx, txid)
        for txid, when in first_seen.items():
            self.submit_time[txid] = when

    def _deliver_tx(self, replica_index: int, txid: TxId) -> None:
        rep = self.replicas[replica_index]
        if txid in rep.arrival_time:
            return
        rep.arrival_time[txid] = self.now
        rep.timeline.append(txid)
        rep.mempool.on_arrival(txid, self.now)
        if rep.correct:
            if txid not in self.first_correct_arrival:
                self.first_correct_arrival[txid] = self.now
            seen = self._correct_deliveries.get(txid, 0) + 1
            self._correct_deliveries[txid] = seen
            if seen >= self.params.n - 2 * self.params.f:
                if txid not in self.committed_global:
                    self.eligible.add(txid)

    # -- round lifecycle ----------------------------------------------------------

    def _start_round(self, round_: int) -> None:
        if self._ended or not self.leader_active or self._in_recovery:
            return
        if self.now > self.sc.duration_ms:
            self.rounds_after_duration += 1
            if (
                not (self.eligible - self.committed_global)
                or self.rounds_after_duration > self.sc.drain_max_rounds
            ):
                self._ended = True
                return
        self.round = round_
        self.round_open = True
        self.round_started_at = self.now
        self.round_check_at = (
            max(self.now, self.sc.gst_ms) + 2.0 * self.sc.delta_ms + 1.0
        )
        self.leader.begin_round(round_)
        leader_rep = self.replicas[self.leader_index]
        leader_rep.known_round = round_
        lo = self._build_order_for(leader_rep, round_)
        if lo is not None:
            self.leader.submit_order(lo)
        epoch = self.epoch
        self._broadcast(
            self.leader_index,
            lambda dst: (lambda d=dst, r=round_, e=epoch: self._on_round_start(d, r, e)),
        )
        self._push(self.round_check_at, self._round_check, round_)

    def _build_order_for(self, rep: _Replica, round_: int) -> LocalOrder | None:
        if rep.behavior is ByzBehavior.SILENT:
            return None
        lo = build_local_order(
            rep.mempool,
            rep.id,
            rep.secret,
            self.scheme,
            round_,
            self.sc.lo_size,
            self.sc.resubmit_fraction,
        )
        if rep.behavior is ByzBehavior.LIE_REVERSE:
            return make_local_order(
                rep.id, rep.secret, self.scheme, round_, tuple(reversed(lo.txs))
            )
        if rep.behavior is ByzBehavior.EQUIVOCATE:
            known = sorted(rep.arrival_time)
            k = min(len(known), max(1, self.sc.lo_size // 2))
            fake = self.rng_byz.sample(known, k) if known else []
            junk = [
                tx_digest(
                    b"junk:"
                    + encode_u64(self.sc.seed)
                    + encode_u64(self.rng_byz.getrandbits(48))
                )
                for _ in range(self.sc.junk_order_size)
            ]
            return make_local_order(
                rep.id, rep.secret, self.scheme, round_, tuple(fake + junk)
            )
        return lo

    def _on_round_start(self, replica_index: int, round_: int, epoch: int) -> None:
        rep = self.replicas[replica_index]
        if epoch < rep.epoch or round_ <= rep.known_round:
            return
        rep.known_round = round_
        lo = self._build_order_for(rep, round_)
        if lo is None:
            return
        extra = self.sc.delta_ms if rep.behavior is ByzBehavior.DELAY_MAX else 0.0
        self._send(
            replica_index,
            self.leader_index,
            lambda o=lo: self._on_local_order(o),
            extra_delay=extra,
        )

    def _on_local_order(self, lo: LocalOrder) -> None:
        if not self.round_open or not self.leader_active:
            return
        self.leader.submit_order(lo)
        if self.now >= self.round_check_at and self.leader.have_quorum():
            self._finish_round()

    def _round_check(self, round_: int) -> None:
        if self.round != round_ or not self.round_open or not self.leader_active:
            return
        if self.leader.have_quorum():
            self._finish_round()
        # Otherwise the next admissible order completes the round.

    def _schedule_next_round(self) -> None:
        next_at = max(self.now, self.round_started_at + self.sc.lo_interval_ms)
        self._push(next_at, self._start_round, self.round + 1)

    # -- round completion -----------------------------------------------------------

    def _finish_round(self) -> None:
        self.round_open = False
        if self.engine is None:
            self._finish_round_autig()
        else:
            self._finish_round_baseline()

    def _record_batch(self, batch) -> int:
        txs = set()
        for lo in batch:
            txs.update(lo.txs)
        for tx in txs:
            self.first_batched_round.setdefault(tx, self.round)
        return len(txs)

    def _finish_round_autig(self) -> None:
        ops_before = self.leader.graph.pair_ops.count
        outcome = self.leader.finish_round()
        batch_txs = self._record_batch(self.leader.last_batch)
        leader_round_ops = (
            self.leader.graph.pair_ops.count - ops_before
        ) + self.leader.extract_ops.count
        self.leader_ops_total += leader_round_ops
        rec = RoundRecord(
            round=self.round,
            outcome=outcome.reason,
            batch_txs=batch_txs,
            leader_ops=leader_round_ops,
            active_graph=self.leader.graph.active_size(),
        )
        if outcome.fragment is None:
            self.round_records.append(rec)
            self._schedule_next_round()
            return

        frag = outcome.fragment
        sig = outcome.leader_sig
        if self.mutation_pending and self.sc.leader_mutation is not None:
            due_round, cls_name = self.sc.leader_mutation
            if self.round >= due_round:
                from .mutations import MUTATIONS

                mcls = MUTATIONS[cls_name]
                if mcls.applicable(frag):
                    frag = mcls.apply(frag)
                    sig = self.scheme.sign(self.leader.secret, frag.header.digest)
                    self.mutation_pending = False

        self.current_fragment = frag
        self.current_blocks = outcome.extraction.blocks
        rec.proof_bytes = len(encode_proof(frag.proof)) if frag.proof else 0
        rec.f_len = len(frag.final_order)
        self.round_records.append(rec)

        leader_rep = self.replicas[self.leader_index]
        leader_rep.stored_fragments[frag.header.digest] = frag
        vote_sig = self.scheme.sign(leader_rep.secret, frag.header.digest)
        self.commit_tracker.add_vote(
            frag.header.digest, self.round, leader_rep.id, vote_sig, self.now
        )
        self._broadcast(
            self.leader_index,
            lambda dst: (lambda d=dst, fr=frag, s=sig: self._on_fragment(d, fr, s)),
        )

    def _finish_round_baseline(self) -> None:
        assert self.engine is not None
        batch_list, _ = select_batch(self.leader.admitted, self.params)
        batch = tuple(batch_list)
        batch_txs = self._record_batch(batch)
        outcome = self.engine.round(batch, self.round)
        self.leader_ops_total += outcome.round_ops
        self.follower_ops_total += outcome.round_ops  # symmetric re-execution
        rec = RoundRecord(
            round=self.round,
            outcome=outcome.reason,
            batch_txs=batch_txs,
            leader_ops=outcome.round_ops,
            follower_ops=outcome.round_ops,
            active_graph=len(self.engine.batches),
        )
        if outcome.fragment is None:
            self.round_records.append(rec)
            self._schedule_next_round()
            return
        frag = outcome.fragment
        rec.f_len = len(frag.final_order)
        if frag.proof is not None:
            rec.proof_bytes = len(encode_proof(frag.proof))
        self.round_records.append(rec)
        self.current_fragment = frag
        self.current_blocks = outcome.blocks
        leader_rep = self.replicas[self.leader_index]
        leader_rep.stored_fragments[frag.header.digest] = frag
        vote_sig = self.scheme.sign(leader_rep.secret, frag.header.digest)
        self.commit_tracker.add_vote(
            frag.header.digest, self.round, leader_rep.id, vote_sig, self.now
        )
        self._broadcast(
            self.leader_index,
            lambda dst: (lambda d=dst, fr=frag: self._on_baseline_fragment(d, fr)),
        )

    # -- follower paths ----------------------------------------------------------------

    def _on_fragment(self, replica_index: int, frag: Fragment, leader_sig: bytes) -> None:
        rep = self.replicas[replica_index]
        leader_pk = self.replicas[self.leader_index].id.pubkey
        if frag.header.leader_pk != leader_pk:
            return
        if not self.scheme.verify(leader_pk, frag.header.digest, leader_sig):
            return
        if frag.header.h_prev != rep.last_committed_digest:
            return
        if frag.header.digest in rep.voted_digests:
            return
        counter = None
        if rep.correct and replica_index == self.follower_counter_index:
            counter = PairOpCounter()
        code = verify_fragment(frag, self.params, self.th, self.scheme, counter=counter)
        if counter is not None:
            self.follower_ops_total += counter.count
            if self.round_records and self.round_records[-1].round == frag.header.round:
                self.round_records[-1].follower_ops = counter.count
        if not rep.correct:
            return  # Byzantine replicas neither vote nor accuse
        if code is None:
            rep.stored_fragments[frag.header.digest] = frag
            rep.voted_digests.add(frag.header.digest)
            sig = self.scheme.sign(rep.secret, frag.header.digest)
            self._send(
                replica_index,
                self.leader_index,
                lambda d=frag.header.digest, r=frag.header.round, rid=rep.id, s=sig: (
                    self._on_vote(d, r, rid, s)
                ),
            )
        else:
            fault = make_order_fault(
                frag, self.params, self.th, self.scheme, leader_sig, rep.id, rep.secret
            )
            for other in self.replicas:
                if other.id.index != replica_index:
                    self._send(
                        replica_index,
                        other.id.index,
                        lambda d=other.id.index, ft=fault: self._on_order_fault(d, ft),
                    )
            self._on_order_fault(replica_index, fault)

    def _on_baseline_fragment(self, replica_index: int, frag: Fragment) -> None:
        rep = self.replicas[replica_index]
        if frag.header.h_prev != rep.last_committed_digest:
            return
        if frag.header.digest in rep.voted_digests or not rep.correct:
            return
        # Symmetric verification: the follower would repeat the leader's
        # recomputation byte for byte; the cost is charged in the round record.
        rep.stored_fragments[frag.header.digest] = frag
        rep.voted_digests.add(frag.header.digest)
        sig = self.scheme.sign(rep.secret, frag.header.digest)
        self._send(
            replica_index,
            self.leader_index,
            lambda d=frag.header.digest, r=frag.header.round, rid=rep.id, s=sig: (
                self._on_vote(d, r, rid, s)
            ),
        )

    def _on_vote(self, digest: bytes, round_: int, voter: ReplicaId, sig: bytes) -> None:
        if not self.leader_active or self._in_recovery:
            return
        record = self.commit_tracker.add_vote(digest, round_, voter, sig, self.now)
        if record is not None and self.current_fragment is not None:
            if self.current_fragment.header.digest == digest:
                self._commit(self.current_fragment)

    # -- commit -------------------------------------------------------------------------

    def _commit(self, frag: Fragment) -> None:
        blocks = self.current_blocks
        self.committed_fragments.append(frag)
        self.committed_blocks.extend(blocks)
        block_text = "|".join(",".join(tx.hex() for tx in blk) for blk in blocks)
        self.commit_log_lines.append(
            f"round={frag.header.round} h={frag.header.digest.hex()} F={block_text}"
        )
        for tx in frag.final_order:
            self.committed_global.add(tx)
            self.eligible.discard(tx)
            self.commit_times[tx] = self.now
            first = self.first_batched_round.get(tx, frag.header.round)
            self.btf_by_tx[tx] = frag.header.round - first + 1
        self.proof_bytes.append(
            len(encode_proof(frag.proof)) if frag.proof is not None else 0
        )
        if self.engine is None:
            self.leader.on_committed(frag, self.sc.prune_horizon)
        else:
            self.engine.on_committed(frag)
        self._apply_commit_to_replica(self.replicas[self.leader_index], frag)
        self._broadcast(
            self.leader_index,
            lambda dst: (lambda d=dst, fr=frag: self._on_commit_msg(d, fr)),
        )
        self._schedule_next_round()

    def _apply_commit_to_replica(self, rep: _Replica, frag: Fragment) -> None:
        rep.mempool.on_finalized(frag.final_order)
        rep.committed_flat.extend(frag.final_order)
        rep.last_committed_digest = frag.header.digest
        rep.stored_fragments[frag.header.digest] = frag
        nxt = rep.pending_commits.pop(frag.header.digest, None)
        if nxt is not None:
            self._apply_commit_to_replica(rep, nxt)

    def _on_commit_msg(self, replica_index: int, frag: Fragment) -> None:
        rep = self.replicas[replica_index]
        if frag.header.digest == rep.last_committed_digest:
            return
        if frag.header.h_prev != rep.last_committed_digest:
            # Crossed a leader change; hold until the predecessor lands.
            rep.pending_commits[frag.header.h_prev] = frag
            return
        self._apply_commit_to_replica(rep, frag)

    # -- fault handling and handoff -------------------------------------------------------

    def _on_order_fault(self, replica_index: int, fault: OrderFault) -> None:
        rep = self.replicas[replica_index]
        leader_pk = self.replicas[self.leader_index].id.pubkey
        if not order_fault_valid(fault, leader_pk, self.scheme):
            return
        if not rep.fault_tracker.add(fault):
            return
        if fault.h_f in rep.handoffs_seen:
            return
        rep.handoffs_seen.add(fault.h_f)
        rep.epoch += 1
        successor = handoff_successor(self.leader_index, self.sc.n)
        if replica_index == successor and rep.epoch > self.epoch:
            self._become_leader(successor)

    def _become_leader(self, new_leader_index: int) -> None:
        self._in_recovery = True
        self.leader_active = False
        self.handoffs += 1
        if self.leader.pre_round_weights:
            self.deposed_pre_anchor_weights = {
                r: dict(w) for r, w in self.leader.pre_round_weights.items()
            }
        self.epoch += 1
        self._push(self.now, self._recover, new_leader_index)

    def _recover(self, new_leader_index: int) -> None:
        rep = self.replicas[new_leader_index]
        anchor_digest = rep.last_committed_digest
        graph = None
        if anchor_digest != GENESIS_DIGEST:
            anchor_frag = None
            for other in self.replicas:  # first digest-matching copy wins
                stored = other.stored_fragments.get(anchor_digest)
                if stored is not None:
                    anchor_frag = stored
                    break
            graph = init_utig_from_fragment(
                anchor_frag, self.params, self.th, self.scheme, anchor_digest
            )
            self.recovery_debug = {
                "anchor_round": anchor_frag.header.round,
                "reconstructed_weights": dict(graph.weights),
            }
            graph.remove_committed(rep.committed_flat)
        self.leader = OrderLeader(
            rep.id,
            rep.secret,
            self.params,
            self.th,
            self.scheme,
            graph=graph,
            h_prev=anchor_digest,
        )
        self.leader.graph.committed.update(rep.committed_flat)
        self.leader_index = new_leader_index
        self.commit_tracker = CommitTracker(self.params, self.scheme)
        self._recovery_replies = []
        epoch = self.epoch
        self._broadcast(
            new_leader_index,
            lambda dst: (lambda d=dst, e=epoch: self._on_recovery_request(d, e)),
        )
        self._collect_recovery_reply(
            make_recovery_reply(
                rep.id, rep.secret, self.scheme, epoch, rep.mempool.pending_unfinalized()
            )
        )

    def _on_recovery_request(self, replica_index: int, epoch: int) -> None:
        rep = self.replicas[replica_index]
        if rep.behavior is ByzBehavior.SILENT:
            return
        rep.epoch = max(rep.epoch, epoch)
        pending = rep.mempool.pending_unfinalized()
        if rep.behavior is ByzBehavior.LIE_REVERSE:
            pending = list(reversed(pending))
        reply = make_recovery_reply(rep.id, rep.secret, self.scheme, epoch, pending)
        self._send(
            replica_index,
            self.leader_index,
            lambda rp=reply: self._collect_recovery_reply(rp),
        )

    def _collect_recovery_reply(self, reply) -> None:
        if not self._in_recovery:
            return
        self._recovery_replies.append(reply)
        admitted = admit_recovery_replies(
            self._recovery_replies, self.epoch, self.params, self.scheme
        )
        if len(admitted) < self.params.batch_size:
            return
        recovery_batch_round = self.round + 1
        self.round = recovery_batch_round
        recovery_round(self.leader, admitted, self.epoch, recovery_batch_round)
        ranked = sorted(admitted, key=lambda r: r.replica.pubkey)
        self._record_batch(
            tuple(r.local_order for r in ranked[: self.params.batch_size])
        )
        self._in_recovery = False
        self.leader_active = True
        self._push(
            max(self.now, self.round_started_at + self.sc.lo_interval_ms),
            self._start_round,
            recovery_batch_round + 1,
        )

    # -- run ---------------------------------------------------------------------------

    def run(self) -> RunResult:
        self.follower_counter_index = next(
            (
                r.id.index
                for r in self.replicas
                if r.correct and r.id.index != self.leader_index
            ),
            None,
        )
        self._schedule_arrivals()
        self._push(self.sc.lo_interval_ms, self._start_round, 1)
        while self._queue:
            when, _, fn, args = heapq.heappop(self._queue)
            self.now = when
            fn(*args)
        return self._finalize()

    def _finalize(self) -> RunResult:
        metrics = Metrics()
        metrics.rounds = self.round
        metrics.handoffs = self.handoffs
        metrics.committed_count = len(self.committed_global)
        end_s = max(self.now, self.sc.duration_ms) / 1000.0
        metrics.committed_tps = len(self.committed_global) / end_s if end_s else 0.0
        lats = sorted(
            self.commit_times[tx] - self.first_correct_arrival[tx]
            for tx in self.commit_times
            if tx in self.first_correct_arrival
        )
        metrics.latencies_ms = lats
        if lats:
            metrics.p50_latency_ms = lats[int(0.50 * (len(lats) - 1))]
            metrics.p99_latency_ms = lats[int(0.99 * (len(lats) - 1))]
        if self.btf_by_tx:
            vals = list(self.btf_by_tx.values())
            metrics.mean_btf = sum(vals) / len(vals)
            metrics.max_btf = max(vals)
        if self.proof_bytes:
            metrics.mean_proof_bytes = sum(self.proof_bytes) / len(self.proof_bytes)
        metrics.leader_ops = self.leader_ops_total
        metrics.follower_ops = self.follower_ops_total

        timelines = [list(rep.timeline) for rep in self.replicas]
        violations = fairness_audit(
            timelines, self.committed_blocks, self.sc.gamma, self.sc.n
        )
        metrics.violations = len(violations)
        safety_ok = self._check_safety()
        uncommitted = len(self.eligible - self.committed_global)
        return RunResult(
            scenario=self.sc,
            metrics=metrics,
            commit_log=(
                "\n".join(self.commit_log_lines) + "\n" if self.commit_log_lines else ""
            ),
            committed_blocks=self.committed_blocks,
            violations=violations,
            round_records=self.round_records,
            timelines=timelines,
            committed_fragments=self.committed_fragments,
            safety_ok=safety_ok,
            uncommitted_eligible=uncommitted,
            btf_by_tx=dict(self.btf_by_tx),
            recovery_debug=self.recovery_debug,
            deposed_pre_anchor_weights=self.deposed_pre_anchor_weights,
        )

    def _check_safety(self) -> bool:
        """Correct replicas agree on the committed sequence once drained."""
        reference = None
        for rep in self.replicas:
            if not rep.correct:
                continue
            if reference is None:
                reference = rep.committed_flat
            elif rep.committed_flat != reference:
                return False
        flat = [tx for blk in self.committed_blocks for tx in blk]
        if len(set(flat)) != len(flat):
            return False
        prev = GENESIS_DIGEST
        for frag in self.committed_fragments:
            if frag.header.h_prev != prev:
                return False
            prev = frag.header.digest
        return True


def run_scenario(scenario: Scenario, scheme: SignatureScheme = MAC_SCHEME) -> RunResult:
    return Simulator(scenario, scheme).run()


def run_record_jsonl(result: RunResult) -> str:
    """Line-delimited per-round records for offline inspection."""
    lines = []
    for rec in result.round_records:
        lines.append(
            json.dumps(
                {
                    "round": rec.round,
                    "outcome": rec.outcome,
                    "batch_txs": rec.batch_txs,
                    "f_len": rec.f_len,
                    "proof_bytes": rec.proof_bytes,
                    "leader_ops": rec.leader_ops,
                    "follower_ops": rec.follower_ops,
                    "active_graph": rec.active_graph,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n" if lines else ""
