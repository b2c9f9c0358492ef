"""Fair-prefix extraction and proof generation.

The extraction subgraph keeps the non-blank vertices and their edges. Its
strongly connected components are condensed into a DAG and topologically
sorted with a deterministic tie-break (ascending smallest member id among
ready components) so that any verifier re-running the same rules reproduces
the exact sequence. The prefix runs up to the last component containing a
solid transaction; multi-member components are linearized by the salted hash
of each member so the leader cannot grind the intra-cycle order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .crypto import DEFAULT_HASH, HashFn, hash_with_salt
from .fragments import ProofData
from .params import Thresholds, TxState, determine_state
from .predicate import PairOpCounter
from .utig import Utig, count_batch_support

TxId = bytes
Graph = dict[bytes, list[bytes]]


def build_extraction_subgraph(g: Utig) -> tuple[list[TxId], Graph]:
    """Non-blank vertices with the induced edge set, adjacency sorted."""
    vertices = sorted(t for t, s in g.states.items() if s != TxState.BLANK)
    vset = set(vertices)
    adj: Graph = {
        v: sorted(w for w in g.out_edges.get(v, ()) if w in vset) for v in vertices
    }
    return vertices, adj


def tarjan_scc(vertices, adj: Graph) -> list[list[TxId]]:
    """Strongly connected components, iteratively (no recursion limit).

    Components come out in reverse topological discovery order; callers that
    need a specific order re-sort via the condensation.
    """
    index: dict[TxId, int] = {}
    lowlink: dict[TxId, int] = {}
    on_stack: set[TxId] = set()
    stack: list[TxId] = []
    sccs: list[list[TxId]] = []
    counter = 0

    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(adj.get(root, ())))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def condense_and_toposort(sccs: list[list[TxId]], adj: Graph) -> list[int]:
    """Topological order of component indices.

    Ties among simultaneously ready components break by ascending smallest
    member id, which is salt-independent and reproducible by any verifier.
    """
    scc_of: dict[TxId, int] = {}
    for i, comp in enumerate(sccs):
        for tx in comp:
            scc_of[tx] = i
    succ: list[set[int]] = [set() for _ in sccs]
    indeg = [0] * len(sccs)
    for u, nbrs in adj.items():
        cu = scc_of[u]
        for v in nbrs:
            cv = scc_of[v]
            if cu != cv and cv not in succ[cu]:
                succ[cu].add(cv)
                indeg[cv] += 1
    min_member = [min(comp) for comp in sccs]
    ready = [(min_member[i], i) for i in range(len(sccs)) if indeg[i] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        _, i = heapq.heappop(ready)
        order.append(i)
        for j in sorted(succ[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, (min_member[j], j))
    return order


def find_anchor(topo: list[int], sccs: list[list[TxId]], states) -> int | None:
    """Largest topo position whose component holds a solid transaction."""
    anchor = None
    for pos, scc_idx in enumerate(topo):
        if any(states.get(tx) == TxState.SOLID for tx in sccs[scc_idx]):
            anchor = pos
    return anchor


def linearize_scc(members, salt: bytes, hashfn: HashFn = DEFAULT_HASH) -> list[TxId]:
    """Order cycle members by the salted hash of their ids."""
    return sorted(members, key=lambda tx: hash_with_salt(tx, salt, hashfn))


@dataclass
class ExtractionResult:
    final_order: tuple[TxId, ...]
    proof: ProofData | None
    anchor_index: int | None
    sccs: list[list[TxId]] = field(default_factory=list)
    topo: list[int] = field(default_factory=list)
    blocks: tuple[tuple[TxId, ...], ...] = ()

    @property
    def empty(self) -> bool:
        return not self.final_order


def assemble_prefix(
    topo: list[int],
    sccs: list[list[TxId]],
    anchor: int | None,
    salt: bytes,
    hashfn: HashFn = DEFAULT_HASH,
) -> tuple[tuple[TxId, ...], tuple[tuple[TxId, ...], ...]]:
    """Concatenate component contents up to and including the anchor."""
    if anchor is None:
        return (), ()
    blocks: list[tuple[TxId, ...]] = []
    for pos in range(anchor + 1):
        comp = sccs[topo[pos]]
        if len(comp) == 1:
            blocks.append((comp[0],))
        else:
            blocks.append(tuple(linearize_scc(comp, salt, hashfn)))
    flat = tuple(tx for block in blocks for tx in block)
    return flat, tuple(blocks)


def extract_prefix(
    g: Utig, salt: bytes, th: Thresholds, hashfn: HashFn = DEFAULT_HASH
) -> ExtractionResult:
    """Extraction without proof assembly (used by the symmetric baselines)."""
    vertices, adj = build_extraction_subgraph(g)
    sccs = tarjan_scc(vertices, adj)
    topo = condense_and_toposort(sccs, adj)
    anchor = find_anchor(topo, sccs, g.states)
    final_order, blocks = assemble_prefix(topo, sccs, anchor, salt, hashfn)
    return ExtractionResult(
        final_order=final_order,
        proof=None,
        anchor_index=anchor,
        sccs=sccs,
        topo=topo,
        blocks=blocks,
    )


def extract_and_prove(
    g: Utig,
    batch,
    salt: bytes,
    th: Thresholds,
    counter: PairOpCounter | None = None,
    hashfn: HashFn = DEFAULT_HASH,
) -> ExtractionResult:
    """Run the full extraction pipeline and build the fragment proof.

    The frontier set is derived from the current batch's support alone, so a
    stateless verifier recomputing it from the raw orders lands on the same
    membership. Absent weight rows are asserted as zero.
    """
    base = extract_prefix(g, salt, th, hashfn)
    sccs, topo, anchor = base.sccs, base.topo, base.anchor_index
    final_order, blocks = base.final_order, base.blocks
    if not final_order:
        return ExtractionResult(
            final_order=(), proof=None, anchor_index=None, sccs=sccs, topo=topo
        )

    states = {tx: g.states[tx] for tx in final_order}
    infix: dict[tuple[TxId, TxId], tuple[int, int]] = {}
    ordered = sorted(final_order)
    for i, u in enumerate(ordered):
        for v in ordered[i + 1 :]:
            w_uv, w_vu = g.weight(u, v), g.weight(v, u)
            infix[(u, v)] = (w_uv, w_vu)
            infix[(v, u)] = (w_vu, w_uv)
            if counter is not None:
                counter.add()

    support = count_batch_support(batch)
    in_f = set(final_order)
    batch_nonblank = {
        tx for tx, c in support.items() if determine_state(c, th) != TxState.BLANK
    }
    frontier: dict[tuple[TxId, TxId], tuple[int, int]] = {}
    for x in sorted(batch_nonblank - in_f):
        for y in sorted(in_f):
            frontier[(x, y)] = (g.weight(x, y), g.weight(y, x))
            if counter is not None:
                counter.add()

    proof = ProofData(states=states, infix=infix, frontier=frontier)
    return ExtractionResult(
        final_order=final_order,
        proof=proof,
        anchor_index=anchor,
        sccs=sccs,
        topo=topo,
        blocks=blocks,
    )
