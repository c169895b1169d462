import httpx
import pytest
from fastapi.testclient import TestClient

from sslc.ledger import AccountId, generate_chain, tx_count_for_account
from sslc.proof_system import verify
from sslc.query_engine import Finalize, Predicate, QuerySpec, evaluate_native
from sslc.services import (
    CountRequest,
    FullNode,
    HttpNode,
    HttpOracle,
    InProcessNode,
    InProcessOracle,
    NodeBehavior,
    NodeMode,
    NodeUnavailable,
    Oracle,
    OracleBehavior,
    OracleMode,
    QueryRejected,
    QueryRequest,
    RootsRequest,
    fullnode_app,
    oracle_app,
)
from sslc.statement import Claim


def claim_of(answer, spec):
    return Claim(answer.view.roots, answer.view.k, answer.result.pair, spec.digest())


@pytest.fixture(scope="module")
def honest_oracle(small_chain, native_params):
    return Oracle(small_chain, native_params)


def test_honest_node(small_chain, alice):
    node = FullNode(small_chain)
    assert node.get_count(alice) == tx_count_for_account(small_chain, alice) == 12
    assert node.get_roots([0, 3]) == [small_chain.blocks[0].tx_root, small_chain.blocks[3].tx_root]
    assert node.get_count(AccountId.from_label("nobody")) == 0


def test_payload_tag_count(small_chain, alice):
    node = FullNode(small_chain)
    per_tag = [node.get_count(alice, t) for t in range(4)]
    assert sum(per_tag) == node.get_count(alice)


def test_roots_out_of_range():
    chain = generate_chain(seed=3, num_blocks=64, txs_per_block=4, relevant_per_block=1,
                           account=AccountId.from_label("x"))
    node = FullNode(chain)
    assert node.get_roots([10**9]) == [None]
    assert node.get_roots([-1, 63]) == [None, chain.blocks[63].tx_root]


def test_wrong_count(small_chain, alice):
    node = FullNode(small_chain, NodeBehavior(NodeMode.WRONG_COUNT, 3))
    assert node.get_count(alice) == 15


def test_wrong_root(small_chain):
    node = FullNode(small_chain, NodeBehavior(NodeMode.WRONG_ROOT, 2))
    got = node.get_roots([1, 2])
    assert got[0] == small_chain.blocks[1].tx_root
    assert got[1] != small_chain.blocks[2].tx_root


def test_stale_view(small_chain, alice):
    node = FullNode(small_chain, NodeBehavior(NodeMode.STALE_VIEW, 2))
    assert node.get_roots([1, 2]) == [small_chain.blocks[1].tx_root, None]
    assert node.get_count(alice) == 6


def test_unavailable(small_chain, alice):
    node = FullNode(small_chain, NodeBehavior(NodeMode.UNAVAILABLE))
    with pytest.raises(NodeUnavailable):
        node.get_count(alice)
    with pytest.raises(NodeUnavailable):
        node.get_roots([0])


@pytest.mark.parametrize("text,mode,param", [
    ("HONEST", NodeMode.HONEST, None),
    ("wrong_count(4)", NodeMode.WRONG_COUNT, 4),
    ("WRONG_COUNT", NodeMode.WRONG_COUNT, 1),
    ("STALE_VIEW:3", NodeMode.STALE_VIEW, 3),
    ("WRONG_ROOT", NodeMode.WRONG_ROOT, None),
])
def test_node_behavior_parse(text, mode, param):
    b = NodeBehavior.parse(text)
    assert (b.mode, b.param) == (mode, param)
    assert NodeBehavior.parse(str(b)) == b


def test_oracle_behavior_parse():
    assert OracleBehavior.parse("OMIT_TX(2)") == OracleBehavior(OracleMode.OMIT_TX, 2)
    assert OracleBehavior.parse("tamper_k").param == 1
    with pytest.raises(ValueError):
        OracleBehavior.parse("LIE")


def test_honest_oracle(honest_oracle, small_chain, avg_spec, native_params):
    ans = honest_oracle.answer(avg_spec)
    truth = evaluate_native(small_chain, avg_spec)
    assert ans.result == truth
    assert ans.view.k == 12
    assert [i for i, _ in ans.view.roots] == [0, 1, 2, 3]
    assert verify(native_params, ans.proof, claim_of(ans, avg_spec))


def test_oracle_caches(honest_oracle, avg_spec):
    assert honest_oracle.honest(avg_spec) is honest_oracle.honest(avg_spec)


def test_tamper_result_proof_fails(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.TAMPER_RESULT)).answer(avg_spec)
    assert not verify(native_params, ans.proof, claim_of(ans, avg_spec))


def test_tamper_k(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.TAMPER_K, 2)).answer(avg_spec)
    assert ans.view.k == 14
    assert not verify(native_params, ans.proof, claim_of(ans, avg_spec))


def test_omit_tx_is_self_consistent(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.OMIT_TX, 1)).answer(avg_spec)
    assert ans.view.k == 11
    assert verify(native_params, ans.proof, claim_of(ans, avg_spec))


def test_tamper_root(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.TAMPER_ROOT, 1)).answer(avg_spec)
    roots = dict(ans.view.roots)
    assert roots[1] != small_chain.blocks[1].tx_root
    assert roots[0] == small_chain.blocks[0].tx_root


def test_foreign_tx_proves_forged_root(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.FOREIGN_TX)).answer(avg_spec)
    assert verify(native_params, ans.proof, claim_of(ans, avg_spec))
    assert dict(ans.view.roots)[0] != small_chain.blocks[0].tx_root


def test_duplicate_tx_never_verifies(small_chain, native_params, avg_spec):
    ans = Oracle(small_chain, native_params, OracleBehavior(OracleMode.DUPLICATE_TX)).answer(avg_spec)
    assert not verify(native_params, ans.proof, claim_of(ans, avg_spec))


def test_query_rejected_without_matches(honest_oracle):
    spec = QuerySpec(AccountId.from_label("nobody"), Predicate.ACCOUNT_TOUCH, Finalize.TOTAL)
    with pytest.raises(QueryRejected):
        honest_oracle.answer(spec)


def test_fullnode_app(small_chain, alice):
    client = TestClient(fullnode_app(FullNode(small_chain)))
    r = client.post("/count", json={"account": alice.hex()})
    assert r.status_code == 200 and r.json() == {"count": 12}
    r = client.post("/roots", json={"indices": [0, 99]})
    assert r.json()["roots"] == [{"index": 0, "digest": small_chain.blocks[0].tx_root.hex()},
                                 {"index": 99, "digest": None}]
    assert client.post("/count", json={"account": "zz"}).status_code == 422
    assert client.get("/health").json()["blocks"] == 4


def test_unavailable_app_returns_503(small_chain, alice):
    client = TestClient(fullnode_app(FullNode(small_chain, NodeBehavior(NodeMode.UNAVAILABLE))))
    assert client.post("/count", json={"account": alice.hex()}).status_code == 503
    node = HttpNode("http://testserver", client=client)
    with pytest.raises(NodeUnavailable):
        node.count(CountRequest(account=alice.hex()))


def test_oracle_app(honest_oracle, avg_spec):
    client = TestClient(oracle_app(honest_oracle))
    r = client.post("/query", json=avg_spec.to_json())
    assert r.status_code == 200
    assert r.json()["chain_view"]["k"] == 12
    nobody = QuerySpec(AccountId.from_label("nobody"), Predicate.ACCOUNT_TOUCH, Finalize.TOTAL)
    assert client.post("/query", json=nobody.to_json()).status_code == 422
    with pytest.raises(QueryRejected):
        HttpOracle("http://testserver", client=client).query(QueryRequest(**nobody.to_json()))


def test_same_bytes_in_process_and_http(small_chain, honest_oracle, avg_spec, alice):
    node = FullNode(small_chain)
    http_node = HttpNode("http://testserver", client=TestClient(fullnode_app(node)))
    local_node = InProcessNode(node)
    for call, req in ((lambda c, r: c.count(r), CountRequest(account=alice.hex())),
                      (lambda c, r: c.roots(r), RootsRequest(indices=[0, 1, 2, 3]))):
        a, b = call(local_node, req), call(http_node, req)
        assert (a.bytes_up, a.bytes_down, a.response) == (b.bytes_up, b.bytes_down, b.response)
    req = QueryRequest(**avg_spec.to_json())
    a = InProcessOracle(honest_oracle).query(req)
    b = HttpOracle("http://testserver", client=TestClient(oracle_app(honest_oracle))).query(req)
    assert (a.bytes_up, a.bytes_down, a.response) == (b.bytes_up, b.bytes_down, b.response)


def test_unreachable_node_raises():
    node = HttpNode("http://127.0.0.1:9", timeout=1.0)
    with pytest.raises(NodeUnavailable):
        node.count(CountRequest(account="00" * 32))


def test_malformed_node_answer(alice):
    transport = httpx.MockTransport(lambda request: httpx.Response(200, content=b"{\"count\": \"many\"}"))
    node = HttpNode("http://bad", client=httpx.Client(transport=transport))
    with pytest.raises(NodeUnavailable):
        node.count(CountRequest(account=alice.hex()))
