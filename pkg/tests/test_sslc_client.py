import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslc.ledger import AccountId, generate_chain
from sslc.proof_system import setup
from sslc.query_engine import Finalize, Predicate, QuerySpec, evaluate_native
from sslc.services import (
    FullNode,
    NodeBehavior,
    NodeMode,
    Oracle,
    OracleBehavior,
    OracleMode,
    OracleUnreachable,
)
from sslc.sslc_client import (
    GIB,
    MIB,
    BandwidthLedger,
    ClientConfig,
    Decision,
    ProtocolOutcome,
    Reason,
    UnknownScenario,
    cost_model,
    expected_outcomes,
    humanize,
    run_protocol,
)


def run(chain, params, spec, oracle_mode=OracleMode.HONEST, node_modes=(NodeMode.HONEST,) * 3):
    oracle = Oracle(chain, params, OracleBehavior(oracle_mode))
    nodes = [FullNode(chain, NodeBehavior(m), name=f"n{i}") for i, m in enumerate(node_modes)]
    return run_protocol(ClientConfig(oracle, nodes, params, spec))


def test_honest_accepts(small_chain, native_params, avg_spec):
    out = run(small_chain, native_params, avg_spec)
    assert (out.decision, out.reason, out.b) == (Decision.ACCEPT, Reason.OK, 1)
    assert out.result == evaluate_native(small_chain, avg_spec)
    assert set(out.bandwidth.bytes_down_per_peer) == {"oracle", "n0", "n1", "n2"}


@pytest.mark.parametrize("oracle_mode", list(OracleMode))
@pytest.mark.parametrize("node_mode", list(NodeMode))
def test_taxonomy_native(small_chain, native_params, avg_spec, oracle_mode, node_mode):
    out = run(small_chain, native_params, avg_spec, oracle_mode, (node_mode, NodeMode.HONEST))
    assert (out.decision, out.reason) in expected_outcomes(oracle_mode, node_mode)


def test_only_all_honest_accepts(small_chain, native_params, avg_spec):
    for om in OracleMode:
        for nm in NodeMode:
            out = run(small_chain, native_params, avg_spec, om, (NodeMode.HONEST, nm, NodeMode.HONEST))
            assert (out.decision is Decision.ACCEPT) == (om is OracleMode.HONEST and nm is NodeMode.HONEST)


def test_rejects_get_no_result(small_chain, native_params, avg_spec):
    out = run(small_chain, native_params, avg_spec, OracleMode.TAMPER_RESULT)
    assert out.reason is Reason.PROOF_INVALID and out.result is None and out.b == 0
    out = run(small_chain, native_params, avg_spec, node_modes=(NodeMode.UNAVAILABLE, NodeMode.HONEST))
    assert out.decision is Decision.ABORT and out.b is None


def test_stale_view_is_bottom(small_chain, native_params, avg_spec):
    out = run(small_chain, native_params, avg_spec, node_modes=(NodeMode.HONEST, NodeMode.STALE_VIEW))
    assert (out.decision, out.reason) == (Decision.ABORT, Reason.NODE_BOTTOM)


def test_needs_two_nodes(small_chain, native_params, avg_spec):
    with pytest.raises(ValueError):
        ClientConfig(Oracle(small_chain, native_params), [FullNode(small_chain)], native_params, avg_spec)


def test_unreachable_oracle(small_chain, native_params, avg_spec):
    cfg = ClientConfig("http://127.0.0.1:9", [FullNode(small_chain)] * 2, native_params, avg_spec)
    cfg.oracle.timeout = 1.0
    with pytest.raises(OracleUnreachable):
        run_protocol(cfg)


def test_duplicate_node_names_metered_separately(small_chain, native_params, avg_spec):
    node = FullNode(small_chain)
    out = run_protocol(ClientConfig(Oracle(small_chain, native_params), [node, node, node], native_params, avg_spec))
    assert set(out.bandwidth.bytes_up_per_peer) == {"oracle", "node", "node#1", "node#2"}


def test_uplink_small(small_chain, native_params, avg_spec):
    out = run(small_chain, native_params, avg_spec)
    per_node = [v for k, v in out.bandwidth.bytes_up_per_peer.items() if k != "oracle"]
    assert out.bandwidth.bytes_up_per_peer["oracle"] <= 1024
    assert len(set(per_node)) == 1


def test_downlink_under_one_mib_at_ten_thousand(alice):
    chain = generate_chain(seed=21, num_blocks=20, txs_per_block=1024, relevant_per_block=500, account=alice)
    params = setup(500, 10, "native")
    spec = QuerySpec(alice, Predicate.ACCOUNT_TOUCH, Finalize.AVERAGE)
    out = run(chain, params, spec)
    assert out.decision is Decision.ACCEPT and out.result.k == 10_000
    assert out.bandwidth.bytes_down < MIB


@pytest.mark.parametrize("finalize", list(Finalize))
def test_payload_tag_flow(small_chain, native_params, alice, finalize):
    spec = QuerySpec(alice, Predicate.PAYLOAD_TAG, finalize, payload_tag=2)
    truth = evaluate_native(small_chain, spec)
    out = run(small_chain, native_params, spec)
    assert out.decision is Decision.ACCEPT
    assert out.result == truth
    out = run(small_chain, native_params, spec, OracleMode.OMIT_TX)
    assert out.reason is Reason.K_MISMATCH


def test_outcome_json_roundtrip(small_chain, native_params, avg_spec):
    for om in (OracleMode.HONEST, OracleMode.TAMPER_ROOT):
        out = run(small_chain, native_params, avg_spec, om)
        back = ProtocolOutcome.from_json(out.to_json())
        assert (back.decision, back.reason, back.result) == (out.decision, out.reason, out.result)
        assert back.bandwidth.to_json() == out.bandwidth.to_json()


def test_outcome_requires_ok_iff_accept():
    with pytest.raises(ValueError):
        ProtocolOutcome(Decision.ACCEPT, Reason.K_MISMATCH)
    with pytest.raises(ValueError):
        ProtocolOutcome(Decision.REJECT, Reason.OK)


def test_rendered_precision(small_chain, native_params, avg_spec):
    out = run(small_chain, native_params, avg_spec)
    value = out.to_json(precision=3)["result"]["value"]
    assert len(value.split(".")[1]) == 3
    assert abs(float(value) - float(out.result.value)) < 1e-3


@settings(max_examples=10)
@given(st.permutations(list(range(3))))
def test_outcome_independent_of_node_order(perm):
    chain = generate_chain(seed=4, num_blocks=3, txs_per_block=16, relevant_per_block=2,
                           account=AccountId.from_label("alice"))
    params = setup(4, 4, "native")
    spec = QuerySpec(AccountId.from_label("alice"))
    modes = [NodeMode.HONEST, NodeMode.HONEST, NodeMode.WRONG_ROOT]
    out = run(chain, params, spec, node_modes=[modes[i] for i in perm])
    assert (out.decision, out.reason) == (Decision.ABORT, Reason.NODE_DISAGREEMENT)
    assert out.bandwidth.bytes_down == run(chain, params, spec, node_modes=modes).bandwidth.bytes_down


def test_bandwidth_ledger():
    led = BandwidthLedger()
    led.record("a", 10, 100)
    led.record("a", 1, 1)
    led.record("b", 5, 7)
    assert (led.bytes_up, led.bytes_down) == (16, 108)
    assert BandwidthLedger.from_json(led.to_json()) == led


# cost model: frozen totals, then the table values within 5%

FROZEN = {
    ("bitcoin", "onlc"): 743_701_254,
    ("bitcoin", "slc"): 212_506_343,
    ("bitcoin", "sslc"): 15_878_672,
    ("eth", "onlc"): 1_144_007_800,
    ("eth", "slc"): 1_127_400_117,
    ("eth", "sslc"): 9_587_216,
}

TABLE = {
    ("bitcoin", "onlc"): 726 * MIB,
    ("bitcoin", "slc"): 201 * MIB,
    ("bitcoin", "sslc"): 15 * MIB,
    ("eth", "onlc"): 1.1 * GIB,
    ("eth", "slc"): 1 * GIB,
    ("eth", "sslc"): 9 * MIB,
}


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_cost_model_frozen(key):
    assert cost_model(*key) == FROZEN[key]


@pytest.mark.parametrize("key", sorted(TABLE))
def test_cost_model_table(key):
    assert abs(cost_model(*key) / TABLE[key] - 1) <= 0.05


def test_cost_model_ordering():
    for s in ("bitcoin", "eth"):
        assert cost_model(s, "onlc") > cost_model(s, "slc") > cost_model(s, "sslc")


def test_cost_model_overrides():
    base = cost_model("bitcoin", "sslc")
    assert cost_model("bitcoin", "sslc", {"full_nodes": 4}) > base
    assert cost_model("BITCOIN_SATOSHI", "SSLC") == base
    with pytest.raises(UnknownScenario):
        cost_model("bitcoin", "sslc", {"nonsense": 1})
    with pytest.raises(UnknownScenario):
        cost_model("dogecoin", "sslc")
    with pytest.raises(UnknownScenario):
        cost_model("eth", "fast")


def test_humanize():
    assert humanize(cost_model("eth", "onlc"))[1] == "GB"
    value, unit = humanize(cost_model("bitcoin", "sslc"))
    assert unit == "MB" and round(value) == 15
