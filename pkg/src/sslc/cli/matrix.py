"""Adversarial matrix: every oracle mode against every node mode for several node-set sizes."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..ledger import AccountId, Chain, generate_chain
from ..proof_system import BackendParams, setup
from ..query_engine import Finalize, Predicate, QuerySpec
from ..services import (
    Exchange,
    FullNode,
    InProcessOracle,
    NodeBehavior,
    NodeMode,
    Oracle,
    OracleBehavior,
    OracleMode,
    QueryRequest,
    QueryResponse,
    encode,
)
from ..sslc_client import ClientConfig, Decision, ProtocolOutcome, expected_outcomes, run_protocol

DEFAULT_NODE_MODES = (NodeMode.HONEST, NodeMode.WRONG_COUNT, NodeMode.WRONG_ROOT, NodeMode.UNAVAILABLE)


@dataclass
class MatrixConfig:
    backend: str = "native"
    shape: tuple[int, int] = (4, 3)
    oracle_modes: Sequence[OracleMode] = tuple(OracleMode)
    node_modes: Sequence[NodeMode] = DEFAULT_NODE_MODES
    ns: Sequence[int] = (2, 3, 5)
    seed: int = 7
    num_blocks: int = 3
    txs_per_block: int = 8
    relevant_per_block: int = 3
    finalize: Finalize = Finalize.AVERAGE
    account: AccountId = field(default_factory=lambda: AccountId.from_label("matrix"))


class _MemoOracle(InProcessOracle):
    """Answers each distinct request once; later cells replay the same bytes."""

    def __init__(self, oracle: Oracle, name: str = "oracle") -> None:
        super().__init__(oracle, name)
        self._memo: dict[bytes, Exchange[QueryResponse]] = {}

    def query(self, req: QueryRequest) -> Exchange[QueryResponse]:
        key = encode(req)
        if key not in self._memo:
            self._memo[key] = super().query(req)
        return self._memo[key]


@dataclass
class Cell:
    oracle_mode: OracleMode
    node_mode: NodeMode
    n: int
    outcome: Optional[ProtocolOutcome]
    error: str = ""

    @property
    def expected(self) -> frozenset:
        return expected_outcomes(self.oracle_mode, self.node_mode)

    @property
    def matches(self) -> bool:
        return self.outcome is not None and (self.outcome.decision, self.outcome.reason) in self.expected

    def to_json(self) -> dict:
        return {
            "oracle_mode": self.oracle_mode.value,
            "node_mode": self.node_mode.value,
            "n": self.n,
            "outcome": self.outcome.to_json() if self.outcome else None,
            "expected": sorted(f"{d.value}/{r.value}" for d, r in self.expected),
            "matches": self.matches,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Cell":
        out = obj.get("outcome")
        return cls(OracleMode(obj["oracle_mode"]), NodeMode(obj["node_mode"]), obj["n"],
                   ProtocolOutcome.from_json(out) if out else None, obj.get("error", ""))


@dataclass
class ScenarioReport:
    backend: str
    shape: tuple[int, int]
    cells: list[Cell]

    def accepts_per_n(self) -> dict[int, int]:
        c = Counter(cell.n for cell in self.cells if cell.outcome and cell.outcome.decision is Decision.ACCEPT)
        return {n: c.get(n, 0) for n in sorted({cell.n for cell in self.cells})}

    @property
    def false_accepts(self) -> list[Cell]:
        return [c for c in self.cells if c.outcome and c.outcome.decision is Decision.ACCEPT
                and (c.oracle_mode, c.node_mode) != (OracleMode.HONEST, NodeMode.HONEST)]

    @property
    def violations(self) -> list[Cell]:
        return [c for c in self.cells if not c.matches]

    def bandwidth_summary(self) -> dict:
        by_n: dict[int, list[int]] = {}
        for c in self.cells:
            if c.outcome:
                by_n.setdefault(c.n, []).append(c.outcome.bandwidth.bytes_down)
        return {str(n): {"min_down": min(v), "max_down": max(v), "mean_down": sum(v) / len(v)}
                for n, v in sorted(by_n.items())}

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "shape": list(self.shape),
            "cells": [c.to_json() for c in self.cells],
            "accepts_per_n": {str(k): v for k, v in self.accepts_per_n().items()},
            "false_accepts": len(self.false_accepts),
            "violations": len(self.violations),
            "bandwidth": self.bandwidth_summary(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioReport":
        return cls(obj["backend"], tuple(obj["shape"]), [Cell.from_json(c) for c in obj["cells"]])


def matrix_chain(config: MatrixConfig) -> Chain:
    return generate_chain(config.seed, config.num_blocks, config.txs_per_block,
                          config.relevant_per_block, config.account)


def matrix(config: Optional[MatrixConfig] = None, chain: Optional[Chain] = None,
           params: Optional[BackendParams] = None) -> ScenarioReport:
    """Run every (oracle mode, node mode, n) cell in-process. One node runs the node mode, the rest are honest."""
    config = config or MatrixConfig()
    chain = chain or matrix_chain(config)
    params = params or setup(*config.shape, config.backend)
    spec = QuerySpec(config.account, Predicate.ACCOUNT_TOUCH, config.finalize)
    cells = []
    for om in config.oracle_modes:
        oracle = _MemoOracle(Oracle(chain, params, OracleBehavior(om)))
        for nm in config.node_modes:
            for n in config.ns:
                nodes = [FullNode(chain, NodeBehavior(nm), "node0")]
                nodes += [FullNode(chain, None, f"node{i}") for i in range(1, n)]
                try:
                    out = run_protocol(ClientConfig(oracle, nodes, params, spec))
                    cells.append(Cell(om, nm, n, out))
                except Exception as exc:  # a crashed cell is a report entry, not a crash
                    cells.append(Cell(om, nm, n, None, f"{type(exc).__name__}: {exc}"))
    return ScenarioReport(params.backend, tuple(config.shape), cells)


__all__ = ["Cell", "DEFAULT_NODE_MODES", "MatrixConfig", "ScenarioReport", "matrix", "matrix_chain"]
