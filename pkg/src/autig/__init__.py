"""Proof-carrying fair ordering with incremental graphs and stateless audits."""

from .params import (
    ProtocolParams,
    ReplicaId,
    Thresholds,
    TxState,
    derive_thresholds,
    determine_state,
)
from .predicate import PairOpCounter, edge_predicate, orient_edge
from .crypto import (
    ED25519_SCHEME,
    MAC_SCHEME,
    compute_salt,
    sha256,
    tx_digest,
)
from .fragments import (
    Fragment,
    FragmentHeader,
    OrderFault,
    ProofData,
    RejectCode,
    compute_fragment_digest,
    decode_fragment,
    encode_fragment,
)
from .localorder import (
    LocalOrder,
    Mempool,
    admit_local_order,
    build_local_order,
    make_local_order,
    select_batch,
)
from .utig import Utig, count_batch_pair_weights, count_batch_support, rebuild_from_scratch
from .extract import extract_and_prove, extract_prefix, linearize_scc, tarjan_scc
from .verify import make_order_fault, verify_fragment
from .protocol import OrderLeader, init_utig_from_fragment, leader_round
from .baseline import BaselineEngine, BaselineMode
from .simnet import ByzBehavior, Metrics, RunResult, Scenario, run_scenario
from .audit import fairness_audit

__version__ = "0.1.0"

__all__ = [
    "ProtocolParams",
    "ReplicaId",
    "Thresholds",
    "TxState",
    "derive_thresholds",
    "determine_state",
    "PairOpCounter",
    "edge_predicate",
    "orient_edge",
    "MAC_SCHEME",
    "ED25519_SCHEME",
    "compute_salt",
    "sha256",
    "tx_digest",
    "Fragment",
    "FragmentHeader",
    "OrderFault",
    "ProofData",
    "RejectCode",
    "compute_fragment_digest",
    "decode_fragment",
    "encode_fragment",
    "LocalOrder",
    "Mempool",
    "admit_local_order",
    "build_local_order",
    "make_local_order",
    "select_batch",
    "Utig",
    "count_batch_pair_weights",
    "count_batch_support",
    "rebuild_from_scratch",
    "extract_and_prove",
    "extract_prefix",
    "linearize_scc",
    "tarjan_scc",
    "make_order_fault",
    "verify_fragment",
    "OrderLeader",
    "init_utig_from_fragment",
    "leader_round",
    "BaselineEngine",
    "BaselineMode",
    "ByzBehavior",
    "Metrics",
    "RunResult",
    "Scenario",
    "run_scenario",
    "fairness_audit",
]
