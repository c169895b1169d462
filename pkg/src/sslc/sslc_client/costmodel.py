"""Closed-form bandwidth totals for the Bitcoin and Ethereum use cases.

Inputs are the quoted per-RPC sizes in bytes (1 KB = 1000 B). Totals are
compared against the table in binary units, which is how the quoted
header totals (534 MB, 21 MB) come out of the per-header sizes.
"""

from __future__ import annotations

import enum
import json
import math
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional


class UnknownScenario(ValueError):
    pass


class Scenario(str, enum.Enum):
    BITCOIN_SATOSHI = "bitcoin"
    ETH_VOTING = "eth"

    @classmethod
    def parse(cls, name: "str | Scenario") -> "Scenario":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for s in cls:
            if key in (s.value, s.name.lower()):
                return s
        raise UnknownScenario(f"unknown scenario {name!r}")


class Approach(str, enum.Enum):
    ONLC = "onlc"
    SLC = "slc"
    SSLC = "sslc"

    @classmethod
    def parse(cls, name: "str | Approach") -> "Approach":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise UnknownScenario(f"unknown approach {name!r}") from None


MIB = 1 << 20
GIB = 1 << 30


@lru_cache(maxsize=1)
def _shipped() -> dict:
    return json.loads(resources.files("sslc.data").joinpath("cost_constants.json").read_text())


def load_constants(scenario: "str | Scenario") -> dict:
    return dict(_shipped()[Scenario.parse(scenario).value])


def _round_up(n: float, granularity: int) -> int:
    return math.ceil(n / granularity) * granularity if granularity > 1 else math.ceil(n)


def _slc_headers(header_total: float, unit: int) -> float:
    # sublinear header storage: log2 of the header total, counted in `unit`s
    return math.log2(header_total / unit) * unit


def _bitcoin(approach: Approach, c: Mapping) -> float:
    headers = c["chain_height"] * c["header_bytes"]
    per_tx = c["relevant_txs"] * (c["raw_tx_bytes"] + c["txoutproof_bytes"])
    if approach is Approach.ONLC:
        return headers + per_tx
    if approach is Approach.SLC:
        return _slc_headers(headers, c["slc_log_unit_bytes"]) + per_tx
    per_node = c["relevant_txs"] * c["getblockhash_bytes"] + c["count_bytes"]
    nodes = c["full_nodes"] * _round_up(per_node, c["node_budget_granularity_bytes"])
    return nodes + c["proof_bytes"] + c["result_bytes"]


def _eth(approach: Approach, c: Mapping) -> float:
    scale = c["votes"] / c["reference_votes"]
    per_vote = scale * (c["tx_by_hash_total_bytes"] + c["tx_proof_total_bytes"]
                        + c["receipt_total_bytes"] + c["receipt_proof_total_bytes"])
    headers = c["election_blocks"] * c["block_details_bytes"]
    if approach is Approach.ONLC:
        return headers + per_vote + c["state_proof_bytes"]
    if approach is Approach.SLC:
        return _slc_headers(headers, c["slc_log_unit_bytes"]) + per_vote + c["state_proof_bytes"]
    per_node = c["sslc_headers"] * c["block_details_bytes"] + c["count_bytes"]
    nodes = c["full_nodes"] * _round_up(per_node, c["node_budget_granularity_bytes"])
    return nodes + c["proof_bytes"] + c["result_bytes"]


def cost_model(scenario: "str | Scenario", approach: "str | Approach",
               params: Optional[Mapping] = None) -> int:
    """Total bytes downloaded by a client following ``approach``. ``params`` overrides shipped constants."""
    s = Scenario.parse(scenario)
    a = Approach.parse(approach)
    c = load_constants(s)
    if params:
        unknown = set(params) - set(c)
        if unknown:
            raise UnknownScenario(f"unknown {s.value} constants: {sorted(unknown)}")
        c.update(params)
    fn = _bitcoin if s is Scenario.BITCOIN_SATOSHI else _eth
    return int(round(fn(a, c)))


def humanize(n_bytes: int) -> tuple[float, str]:
    if n_bytes >= GIB:
        return n_bytes / GIB, "GB"
    return n_bytes / MIB, "MB"


__all__ = ["Approach", "GIB", "MIB", "Scenario", "UnknownScenario", "cost_model", "humanize", "load_constants"]
