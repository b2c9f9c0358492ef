"""Global order-fairness audit over a finished run.

The auditor sees what no live replica can: every replica's ground-truth
receive timeline, including what lying replicas actually observed. For every
ordered pair of committed transactions, if at least ceil(gamma * n) timelines
place tx1 before tx2, tx1's committed batch index must not exceed tx2's.
Batch indices count contiguous cycle blocks: members of one block share an
index and can never violate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

TxId = bytes


@dataclass(frozen=True)
class FairnessViolation:
    tx1: TxId
    tx2: TxId
    observers: int
    batch1: int
    batch2: int


def gamma_quorum(gamma: float, n: int) -> int:
    """ceil(gamma * n) with exact decimal arithmetic."""
    return math.ceil(Fraction(str(gamma)) * n)


def fairness_audit(
    timelines: list[list[TxId]],
    blocks: list[tuple[TxId, ...]],
    gamma: float,
    n: int,
) -> list[FairnessViolation]:
    """Check every committed pair against the observed-precedence quorum.

    timelines holds one receive sequence per replica (all n of them, ground
    truth). blocks is the committed sequence split into its cycle batches.
    A transaction missing from a timeline counts as arriving after every
    transaction that did arrive there.
    """
    committed: list[TxId] = [tx for block in blocks for tx in block]
    if len(set(committed)) != len(committed):
        raise ValueError("committed sequence repeats a transaction")
    if not committed:
        return []
    batch_index: dict[TxId, int] = {}
    for bi, block in enumerate(blocks):
        for tx in block:
            batch_index[tx] = bi

    order = {tx: i for i, tx in enumerate(committed)}
    m = len(committed)
    positions = np.full((len(timelines), m), np.inf)
    for ri, timeline in enumerate(timelines):
        for pos, tx in enumerate(timeline):
            col = order.get(tx)
            if col is not None:
                positions[ri, col] = pos

    counts = np.zeros((m, m), dtype=np.int32)
    for ri in range(len(timelines)):
        row = positions[ri]
        counts += (row[:, None] < row[None, :]).astype(np.int32)

    quorum = gamma_quorum(gamma, n)
    b = np.array([batch_index[tx] for tx in committed])
    mandated = counts >= quorum
    violated = mandated & (b[:, None] > b[None, :])

    out: list[FairnessViolation] = []
    for i, j in zip(*np.nonzero(violated)):
        out.append(
            FairnessViolation(
                tx1=committed[i],
                tx2=committed[j],
                observers=int(counts[i, j]),
                batch1=int(b[i]),
                batch2=int(b[j]),
            )
        )
    return out
