"""Stateless client protocol and the bandwidth cost model."""

from .client import (
    BandwidthLedger,
    ClientConfig,
    Decision,
    OracleUnreachable,
    ProtocolOutcome,
    Reason,
    expected_outcomes,
    query_phase,
    run_protocol,
    verify_phase,
)
from .costmodel import GIB, MIB, Approach, Scenario, UnknownScenario, cost_model, humanize, load_constants

__all__ = [
    "GIB",
    "MIB",
    "Approach",
    "BandwidthLedger",
    "ClientConfig",
    "Decision",
    "OracleUnreachable",
    "ProtocolOutcome",
    "Reason",
    "Scenario",
    "UnknownScenario",
    "cost_model",
    "expected_outcomes",
    "humanize",
    "load_constants",
    "query_phase",
    "run_protocol",
    "verify_phase",
]
