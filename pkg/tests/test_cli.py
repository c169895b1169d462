import json
import socket
import threading
import time

import pytest
import uvicorn
from click.testing import CliRunner

from sslc.cli import main
from sslc.cli.bench import BenchRecord, from_csv
from sslc.ledger import Chain, generate_chain
from sslc.proof_system import setup
from sslc.query_engine import QuerySpec, evaluate_native
from sslc.services import NodeBehavior, OracleBehavior, fullnode_serve, oracle_serve


@pytest.fixture
def runner():
    return CliRunner()


def test_chain_gen(runner, tmp_path):
    out, spec = tmp_path / "c.jsonl", tmp_path / "spec.json"
    r = runner.invoke(main, ["chain", "gen", "--seed", "3", "--blocks", "2", "--txs-per-block", "16",
                             "--relevant", "2", "--finalize", "TOTAL", "--out", str(out), "--spec-out", str(spec)])
    assert r.exit_code == 0, r.output
    chain = Chain.read_jsonl(out)
    assert len(chain) == 2 and chain.total_transactions == 32
    q = QuerySpec.from_json(json.loads(spec.read_text()))
    assert q.finalize.value == "TOTAL"
    assert evaluate_native(chain, q).k == 4


def test_chain_gen_stdout_deterministic(runner):
    args = ["chain", "gen", "--seed", "9", "--blocks", "1", "--txs-per-block", "8", "--relevant", "1"]
    a, b = runner.invoke(main, args), runner.invoke(main, args)
    assert a.exit_code == 0 and a.output == b.output
    assert len(Chain.from_jsonl(a.output)) == 1


@pytest.mark.parametrize("scenario,approach,unit", [("bitcoin", "sslc", "MB"), ("eth", "onlc", "GB")])
def test_costmodel(runner, scenario, approach, unit):
    r = runner.invoke(main, ["sslc", "costmodel", "--scenario", scenario, "--approach", approach])
    assert r.exit_code == 0
    obj = json.loads(r.output)
    assert obj["unit"] == unit and obj["bytes"] > 0


def test_costmodel_rejects_unknown(runner):
    r = runner.invoke(main, ["sslc", "costmodel", "--scenario", "doge", "--approach", "sslc"])
    assert r.exit_code == 2


def test_matrix_native(runner, tmp_path):
    out = tmp_path / "m.json"
    r = runner.invoke(main, ["matrix", "--ns", "2", "--out", str(out)])
    assert r.exit_code == 0, r.output
    report = json.loads(out.read_text())
    assert len(report["cells"]) == 7 * 4
    accepts = [c for c in report["cells"] if c["outcome"]["decision"] == "ACCEPT"]
    assert [(c["oracle_mode"], c["node_mode"]) for c in accepts] == [("HONEST", "HONEST")]


def test_bench_native(runner):
    r = runner.invoke(main, ["bench", "--workloads", "4,16", "--shape", "4,4"])
    assert r.exit_code == 0, r.output
    csv_text = r.stdout
    assert csv_text.splitlines()[0].split(",") == BenchRecord.columns()
    records = from_csv(csv_text)
    assert [x.workload for x in records] == [4, 16]
    assert all(x.backend == "native" and x.prover_time_s > 0 for x in records)


def test_bench_usage_errors(runner):
    r = runner.invoke(main, ["bench", "--workloads", "16,4", "--shape", "4,4"])
    assert r.exit_code == 2 and "sorted" in r.output
    r = runner.invoke(main, ["bench", "--workloads", "4", "--shape", "4,2", "--txs-per-block", "8"])
    assert r.exit_code == 2


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class _Server(uvicorn.Server):
    def install_signal_handlers(self):
        pass


@pytest.fixture
def serve():
    servers = []

    def start(app):
        port = _free_port()
        srv = _Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
        t = threading.Thread(target=srv.run, daemon=True)
        t.start()
        while not srv.started:
            time.sleep(0.01)
        servers.append((srv, t))
        return f"http://127.0.0.1:{port}"

    yield start
    for srv, t in servers:
        srv.should_exit = True
        t.join(timeout=5)


@pytest.mark.parametrize("node_behavior,decision,reason", [
    ("HONEST", "ACCEPT", "OK"),
    ("WRONG_COUNT(2)", "ABORT", "NODE_DISAGREEMENT"),
    ("UNAVAILABLE", "ABORT", "NODE_BOTTOM"),
])
def test_sslc_run_over_http(runner, serve, tmp_path, alice, avg_spec, node_behavior, decision, reason):
    chain = generate_chain(seed=2, num_blocks=3, txs_per_block=16, relevant_per_block=2, account=alice)
    oracle = serve(oracle_serve(chain, setup(4, 4, "native")))
    nodes = [serve(fullnode_serve(chain, NodeBehavior.parse(b), f"n{i}"))
             for i, b in enumerate(["HONEST", node_behavior])]
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(avg_spec.to_json()))
    r = runner.invoke(main, ["sslc", "run", "--spec", str(spec), "--oracle", oracle, "--nodes", ",".join(nodes),
                             "--shape", "4,4", "--precision", "2"])
    assert r.exit_code == 0, r.output
    obj = json.loads(r.output)
    assert (obj["decision"], obj["reason"]) == (decision, reason)
    if decision == "ACCEPT":
        truth = evaluate_native(chain, avg_spec)
        assert obj["result"]["value"] == truth.render(2)
        assert obj["bandwidth"]["bytes_up"] > 0


def test_sslc_run_tampering_oracle(runner, serve, tmp_path, alice, avg_spec):
    chain = generate_chain(seed=2, num_blocks=3, txs_per_block=16, relevant_per_block=2, account=alice)
    oracle = serve(oracle_serve(chain, setup(4, 4, "native"), OracleBehavior.parse("TAMPER_ROOT")))
    nodes = ",".join(serve(fullnode_serve(chain)) for _ in range(2))
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(avg_spec.to_json()))
    r = runner.invoke(main, ["sslc", "run", "--spec", str(spec), "--oracle", oracle, "--nodes", nodes,
                             "--shape", "4,4"])
    assert json.loads(r.output)["reason"] == "ROOT_MISMATCH"


def test_sslc_run_needs_two_nodes(runner, tmp_path, avg_spec):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(avg_spec.to_json()))
    r = runner.invoke(main, ["sslc", "run", "--spec", str(spec), "--oracle", "http://x", "--nodes", "http://y",
                             "--shape", "4,4"])
    assert r.exit_code == 2
