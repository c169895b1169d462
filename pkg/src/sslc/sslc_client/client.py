"""The stateless client: ask the oracle, cross-check its view against full nodes, verify the proof."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ..field_merkle import Digest
from ..proof_system import BackendParams, MalformedProof, Proof, verify
from ..query_engine import Predicate, QueryResult, QuerySpec
from ..services import (
    CountRequest,
    FullNode,
    NodeClient,
    NodeMode,
    NodeUnavailable,
    Oracle,
    OracleClient,
    OracleMode,
    OracleUnreachable,
    QueryRequest,
    RootsRequest,
    node_client,
    oracle_client,
)
from ..statement import ChainView, Claim


class Decision(str, enum.Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"
    ABORT = "ABORT"

    @property
    def b(self) -> Optional[int]:
        return {"ACCEPT": 1, "REJECT": 0}.get(self.value)


class Reason(str, enum.Enum):
    OK = "OK"
    K_MISMATCH = "K_MISMATCH"
    ROOT_MISMATCH = "ROOT_MISMATCH"
    PROOF_INVALID = "PROOF_INVALID"
    NODE_DISAGREEMENT = "NODE_DISAGREEMENT"
    NODE_BOTTOM = "NODE_BOTTOM"


@dataclass
class BandwidthLedger:
    bytes_down_per_peer: dict[str, int] = field(default_factory=dict)
    bytes_up_per_peer: dict[str, int] = field(default_factory=dict)

    def record(self, peer: str, up: int, down: int) -> None:
        self.bytes_up_per_peer[peer] = self.bytes_up_per_peer.get(peer, 0) + up
        self.bytes_down_per_peer[peer] = self.bytes_down_per_peer.get(peer, 0) + down

    @property
    def bytes_up(self) -> int:
        return sum(self.bytes_up_per_peer.values())

    @property
    def bytes_down(self) -> int:
        return sum(self.bytes_down_per_peer.values())

    def to_json(self) -> dict:
        return {
            "bytes_down_per_peer": dict(self.bytes_down_per_peer),
            "bytes_up_per_peer": dict(self.bytes_up_per_peer),
            "bytes_down": self.bytes_down,
            "bytes_up": self.bytes_up,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BandwidthLedger":
        return cls(dict(obj.get("bytes_down_per_peer", {})), dict(obj.get("bytes_up_per_peer", {})))


@dataclass
class ProtocolOutcome:
    decision: Decision
    reason: Reason
    bandwidth: BandwidthLedger = field(default_factory=BandwidthLedger)
    result: Optional[QueryResult] = None
    detail: str = ""

    def __post_init__(self) -> None:
        if (self.decision is Decision.ACCEPT) != (self.reason is Reason.OK):
            raise ValueError("ACCEPT goes with reason OK and only with it")

    @property
    def b(self) -> Optional[int]:
        return self.decision.b

    def to_json(self, precision: int = 6) -> dict:
        out = {
            "decision": self.decision.value,
            "b": self.b,
            "reason": self.reason.value,
            "detail": self.detail,
            "bandwidth": self.bandwidth.to_json(),
        }
        if self.result is not None:
            out["result"] = self.result.to_json() | {"value": self.result.render(precision)}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ProtocolOutcome":
        res = obj.get("result")
        return cls(
            Decision(obj["decision"]),
            Reason(obj["reason"]),
            BandwidthLedger.from_json(obj.get("bandwidth", {})),
            QueryResult.from_json(res) if res else None,
            obj.get("detail", ""),
        )


NodeTarget = Union[str, FullNode, NodeClient]


@dataclass
class ClientConfig:
    oracle: Union[str, Oracle, OracleClient]
    nodes: Sequence[NodeTarget]
    params: BackendParams
    spec: QuerySpec
    precision: int = 6

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("at least two full nodes are needed to observe disagreement")
        self.oracle = oracle_client(self.oracle)
        self.nodes = [node_client(n) for n in self.nodes]


def _names(clients: Sequence[NodeClient]) -> list[str]:
    """Peer labels, made unique so metering never merges two peers."""
    seen: dict[str, int] = {}
    out = []
    for c in clients:
        n = seen.get(c.name, 0)
        seen[c.name] = n + 1
        out.append(c.name if n == 0 else f"{c.name}#{n}")
    return out


def query_phase(config: ClientConfig, ledger: Optional[BandwidthLedger] = None) -> tuple[QueryResult, ChainView, Proof]:
    """Send the query and return the oracle's (result, view, proof) as received."""
    ledger = ledger if ledger is not None else BandwidthLedger()
    req = QueryRequest(**config.spec.to_json())
    ex = config.oracle.query(req)
    ledger.record(config.oracle.name, ex.bytes_up, ex.bytes_down)
    r = ex.response
    result = QueryResult(r.result.numerator, r.result.denominator, r.result.k)
    view = ChainView(tuple((e.index, Digest.from_hex(e.digest)) for e in r.chain_view.roots), r.chain_view.k)
    return result, view, Proof.from_base64(r.proof)


def _ask(client: NodeClient, count_req: CountRequest, roots_req: RootsRequest):
    try:
        c = client.count(count_req)
        r = client.roots(roots_req)
    except NodeUnavailable as exc:
        return None, str(exc)
    return (c, r), ""


def verify_phase(
    config: ClientConfig,
    result: QueryResult,
    view: ChainView,
    proof: Optional[Proof],
    ledger: Optional[BandwidthLedger] = None,
) -> ProtocolOutcome:
    ledger = ledger if ledger is not None else BandwidthLedger()
    spec = config.spec
    tag = spec.payload_tag if spec.predicate is Predicate.PAYLOAD_TAG else None
    count_req = CountRequest(account=spec.account.hex(), payload_tag=tag)
    indices = [i for i, _ in view.roots]
    roots_req = RootsRequest(indices=indices)

    def outcome(decision: Decision, reason: Reason, detail: str = "") -> ProtocolOutcome:
        return ProtocolOutcome(decision, reason, ledger, result if decision is Decision.ACCEPT else None, detail)

    clients = list(config.nodes)
    names = _names(clients)
    with ThreadPoolExecutor(max_workers=len(clients)) as pool:
        answers = list(pool.map(lambda c: _ask(c, count_req, roots_req), clients))

    for name, (ans, _) in zip(names, answers):
        if ans is not None:
            c, r = ans
            ledger.record(name, c.bytes_up + r.bytes_up, c.bytes_down + r.bytes_down)

    counts, root_lists = [], []
    for name, (ans, err) in zip(names, answers):
        if ans is None:
            return outcome(Decision.ABORT, Reason.NODE_BOTTOM, f"{name}: {err}")
        c, r = ans
        entries = r.response.roots
        if c.response.count is None:
            return outcome(Decision.ABORT, Reason.NODE_BOTTOM, f"{name} answered ⊥ for the count")
        if [e.index for e in entries] != indices or any(e.digest is None for e in entries):
            return outcome(Decision.ABORT, Reason.NODE_BOTTOM, f"{name} answered ⊥ for a root")
        counts.append(c.response.count)
        root_lists.append(tuple((e.index, e.digest) for e in entries))

    if len(set(counts)) > 1:
        return outcome(Decision.ABORT, Reason.NODE_DISAGREEMENT, f"counts differ: {counts}")
    if len(set(root_lists)) > 1:
        return outcome(Decision.ABORT, Reason.NODE_DISAGREEMENT, "roots differ between nodes")

    k_prime = counts[0]
    if k_prime != view.k:
        return outcome(Decision.REJECT, Reason.K_MISMATCH, f"oracle k={view.k}, full nodes k'={k_prime}")
    agreed = root_lists[0]
    if agreed != tuple((i, d.hex()) for i, d in view.roots):
        return outcome(Decision.REJECT, Reason.ROOT_MISMATCH, "oracle roots differ from full-node roots")

    if proof is None or result.k != view.k:
        return outcome(Decision.REJECT, Reason.PROOF_INVALID, "response is internally inconsistent")
    claim = Claim(view.roots, view.k, result.pair, spec.digest())
    if not claim.well_formed() or not verify(config.params, proof, claim):
        return outcome(Decision.REJECT, Reason.PROOF_INVALID, "proof does not verify against the claim")
    return outcome(Decision.ACCEPT, Reason.OK)


_ORACLE_TAXONOMY = {
    OracleMode.HONEST: {(Decision.ACCEPT, Reason.OK)},
    OracleMode.OMIT_TX: {(Decision.REJECT, Reason.K_MISMATCH)},
    OracleMode.DUPLICATE_TX: {(Decision.REJECT, Reason.PROOF_INVALID), (Decision.REJECT, Reason.K_MISMATCH)},
    OracleMode.TAMPER_RESULT: {(Decision.REJECT, Reason.PROOF_INVALID)},
    OracleMode.TAMPER_ROOT: {(Decision.REJECT, Reason.ROOT_MISMATCH)},
    OracleMode.TAMPER_K: {(Decision.REJECT, Reason.K_MISMATCH), (Decision.REJECT, Reason.PROOF_INVALID)},
    OracleMode.FOREIGN_TX: {(Decision.REJECT, Reason.ROOT_MISMATCH)},
}

_NODE_TAXONOMY = {
    NodeMode.WRONG_COUNT: (Decision.ABORT, Reason.NODE_DISAGREEMENT),
    NodeMode.WRONG_ROOT: (Decision.ABORT, Reason.NODE_DISAGREEMENT),
    NodeMode.UNAVAILABLE: (Decision.ABORT, Reason.NODE_BOTTOM),
    NodeMode.STALE_VIEW: (Decision.ABORT, Reason.NODE_BOTTOM),
}


def expected_outcomes(oracle_mode: OracleMode, node_mode: NodeMode) -> frozenset[tuple[Decision, Reason]]:
    """Admissible (decision, reason) pairs when one node runs ``node_mode`` and the rest are honest.

    Node checks run before any oracle check, so a misbehaving node masks the oracle.
    """
    if node_mode is not NodeMode.HONEST:
        return frozenset({_NODE_TAXONOMY[node_mode]})
    return frozenset(_ORACLE_TAXONOMY[oracle_mode])


def run_protocol(config: ClientConfig) -> ProtocolOutcome:
    ledger = BandwidthLedger()
    try:
        result, view, proof = query_phase(config, ledger)
    except MalformedProof as exc:
        return ProtocolOutcome(Decision.REJECT, Reason.PROOF_INVALID, ledger, None, f"malformed proof: {exc}")
    return verify_phase(config, result, view, proof, ledger)


__all__ = [
    "BandwidthLedger",
    "ClientConfig",
    "Decision",
    "OracleUnreachable",
    "ProtocolOutcome",
    "Reason",
    "expected_outcomes",
    "query_phase",
    "run_protocol",
    "verify_phase",
]
