"""Deterministic, anti-symmetric edge orientation predicate.

An edge u -> v is supported when the u-before-v weight reaches the edge
threshold and either the reverse direction is below threshold, strictly
weaker, or tied with u winning the id tie-break. State filtering (blank
endpoints carry no edges) is the caller's responsibility.
"""

from __future__ import annotations

from .params import Thresholds

TxId = bytes


def edge_predicate(u: TxId, v: TxId, w_uv: int, w_vu: int, th: Thresholds) -> bool:
    if w_uv < th.t_edge:
        return False
    return w_vu < th.t_edge or w_uv > w_vu or (w_uv == w_vu and u < v)


def orient_edge(u: TxId, v: TxId, w_uv: int, w_vu: int, th: Thresholds):
    """Resolve a pair to a directed edge, or None if neither direction holds.

    Counts as a single pair operation; anti-symmetry of the predicate
    guarantees at most one direction wins.
    """
    if edge_predicate(u, v, w_uv, w_vu, th):
        return (u, v)
    if edge_predicate(v, u, w_vu, w_uv, th):
        return (v, u)
    return None


class PairOpCounter:
    """Mutable counter for pairwise work, shared by leader and verifier paths."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int = 1) -> None:
        self.count += n

    def reset(self) -> None:
        self.count = 0
