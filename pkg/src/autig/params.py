"""Protocol parameters, public thresholds and transaction-state classification.

Thresholds are derived from (n, f, gamma) with exact rational arithmetic so
floor boundaries never depend on binary float rounding:

* solid threshold: n - 2f
* non-blank threshold: floor(n * (1 - gamma) + gamma * f + 1)
* edge threshold: equal to the non-blank threshold

The feasibility bound n > 2f(gamma + 1) / (2*gamma - 1) is enforced only in
strict mode; permissive mode allows deliberately infeasible parameter sets
for experiments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .errors import InfeasibleParams, InvalidGamma


class TxState(enum.IntEnum):
    """Per-round support class. Values are ordered by increasing support."""

    BLANK = 0
    SHADED = 1
    SOLID = 2


@dataclass(frozen=True)
class ReplicaId:
    """Replica identity; the pubkey bytes define the canonical total order."""

    index: int
    pubkey: bytes

    def sort_key(self) -> bytes:
        return self.pubkey


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    f: int
    gamma: float
    strict_bound: bool = True

    @property
    def batch_size(self) -> int:
        """Number of local orders consumed per round."""
        return self.n - self.f

    def gamma_fraction(self) -> Fraction:
        # Interpret gamma by its decimal spelling, not its binary expansion,
        # so 0.875 means exactly 7/8.
        return Fraction(str(self.gamma))


def feasibility_holds(n: int, f: int, gamma: Fraction) -> bool:
    """Exact check of n > 2f(gamma+1)/(2*gamma - 1)."""
    if f == 0:
        return True
    return n * (2 * gamma - 1) > 2 * f * (gamma + 1)


@dataclass(frozen=True)
class Thresholds:
    t_solid: int
    t_nonblank: int
    t_edge: int


def derive_thresholds(params: ProtocolParams) -> Thresholds:
    """Compute the public thresholds, validating parameters.

    Raises InvalidGamma for gamma outside (1/2, 1], InfeasibleParams when
    strict_bound is set and the feasibility bound fails, and ValueError for
    nonsensical n/f.
    """
    gamma = params.gamma_fraction()
    if not (Fraction(1, 2) < gamma <= 1):
        raise InvalidGamma(f"gamma must be in (1/2, 1], got {params.gamma}")
    if params.f < 0 or params.n <= 2 * params.f:
        raise ValueError(f"need n > 2f, got n={params.n} f={params.f}")
    if params.strict_bound and not feasibility_holds(params.n, params.f, gamma):
        raise InfeasibleParams(
            f"n={params.n} violates n > 2f(gamma+1)/(2gamma-1) "
            f"for f={params.f}, gamma={params.gamma}"
        )
    t_solid = params.n - 2 * params.f
    t_nonblank = int(params.n * (1 - gamma) + gamma * params.f + 1)  # exact floor
    if not (0 < t_nonblank <= params.n - params.f):
        raise ValueError(f"non-blank threshold {t_nonblank} out of range")
    return Thresholds(t_solid=t_solid, t_nonblank=t_nonblank, t_edge=t_nonblank)


def determine_state(support: int, th: Thresholds) -> TxState:
    """Classify a transaction by its support count in the current batch."""
    if support >= th.t_solid:
        return TxState.SOLID
    if support < th.t_nonblank:
        return TxState.BLANK
    return TxState.SHADED
