"""Command line: fixtures, services, the client, the cost model, benchmarks and the adversarial matrix."""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path
from typing import Optional

import click

from ..ledger import AccountId, Chain, generate_chain
from ..proof_system import ShapeTooSmall
from ..query_engine import Finalize, Predicate, QuerySpec
from .bench import BenchRecord, bench, to_csv
from .matrix import MatrixConfig, ScenarioReport, matrix

_HEX64 = re.compile(r"^[0-9a-fA-F]{64}$")


def _account(value: str) -> AccountId:
    return AccountId.from_hex(value) if _HEX64.match(value) else AccountId.from_label(value)


def _shape(value: str) -> tuple[int, int]:
    try:
        cap, depth = (int(x) for x in value.split(","))
    except ValueError:
        raise click.BadParameter("expected CAPACITY,DEPTH") from None
    return cap, depth


def _ints(value: str) -> list[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers") from None


def _emit(text: str, out: Optional[str]) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


backend_opt = click.option("--backend", type=click.Choice(["native", "plonky2"]), default="native",
                           show_default=True)
shape_opt = click.option("--shape", default="100,12", show_default=True, help="batch capacity,tree depth")
out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None, help="write here instead of stdout")


@click.group()
def main() -> None:
    """Stateless superlight client toolkit."""


@main.group()
def chain() -> None:
    """Synthetic chains."""


@chain.command("gen")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--blocks", type=int, default=8, show_default=True)
@click.option("--txs-per-block", type=int, default=256, show_default=True)
@click.option("--relevant", type=int, default=16, show_default=True, help="relevant txs per block")
@click.option("--account", default="alice", show_default=True, help="label or 64-hex account id")
@click.option("--finalize", type=click.Choice([f.value for f in Finalize]), default="AVERAGE", show_default=True)
@click.option("--spec-out", type=click.Path(dir_okay=False), default=None, help="also write a matching query spec")
@out_opt
def chain_gen(seed, blocks, txs_per_block, relevant, account, finalize, spec_out, out) -> None:
    acct = _account(account)
    c = generate_chain(seed, blocks, txs_per_block, relevant, acct)
    _emit(c.to_jsonl(), out)
    if spec_out:
        spec = QuerySpec(acct, Predicate.ACCOUNT_TOUCH, Finalize(finalize))
        Path(spec_out).write_text(_dump(spec.to_json()) + "\n")


@main.group()
def serve() -> None:
    """Run a full node or an oracle over HTTP."""


@serve.command("fullnode")
@click.option("--chain", "chain_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--behavior", default="HONEST", show_default=True, help="e.g. WRONG_COUNT(2)")
@click.option("--name", default="node", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8101, show_default=True)
def serve_fullnode(chain_path, behavior, name, host, port) -> None:
    import uvicorn

    from ..services import NodeBehavior, fullnode_serve

    app = fullnode_serve(Chain.read_jsonl(chain_path), NodeBehavior.parse(behavior), name)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@serve.command("oracle")
@click.option("--chain", "chain_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--behavior", default="HONEST", show_default=True, help="e.g. OMIT_TX(1)")
@backend_opt
@shape_opt
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8100, show_default=True)
def serve_oracle(chain_path, behavior, backend, shape, host, port) -> None:
    import uvicorn

    from ..proof_system import setup
    from ..services import OracleBehavior, oracle_serve

    params = setup(*_shape(shape), backend)
    app = oracle_serve(Chain.read_jsonl(chain_path), params, OracleBehavior.parse(behavior))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def sslc() -> None:
    """Client-side commands."""


@sslc.command("run")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--oracle", required=True, help="oracle base URL")
@click.option("--nodes", required=True, help="comma-separated full-node URLs")
@click.option("--precision", type=int, default=6, show_default=True)
@backend_opt
@shape_opt
@out_opt
def sslc_run(spec_path, oracle, nodes, precision, backend, shape, out) -> None:
    """Query the oracle, cross-check with the full nodes, verify, and print the outcome."""
    from ..proof_system import setup
    from ..sslc_client import ClientConfig, run_protocol

    spec = QuerySpec.from_json(json.loads(Path(spec_path).read_text()))
    params = setup(*_shape(shape), backend)
    urls = [u.strip() for u in nodes.split(",") if u.strip()]
    try:
        config = ClientConfig(oracle, urls, params, spec, precision)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--nodes") from None
    outcome = run_protocol(config)
    _emit(_dump(outcome.to_json(precision)), out)


@sslc.command("costmodel")
@click.option("--scenario", type=click.Choice(["bitcoin", "eth"]), required=True)
@click.option("--approach", type=click.Choice(["onlc", "slc", "sslc"]), required=True)
@out_opt
def sslc_costmodel(scenario, approach, out) -> None:
    from ..sslc_client import cost_model, humanize

    n = cost_model(scenario, approach)
    value, unit = humanize(n)
    _emit(_dump({"scenario": scenario, "approach": approach, "bytes": n, "value": round(value, 3), "unit": unit}), out)


@main.command("bench")
@click.option("--workloads", default="10,100,1000,10000", show_default=True)
@shape_opt
@click.option("--repetitions", type=int, default=1, show_default=True)
@click.option("--txs-per-block", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@backend_opt
@out_opt
def bench_cmd(workloads, shape, repetitions, txs_per_block, seed, backend, out) -> None:
    """CSV of proof size, prover and verifier time and memory per workload."""
    def progress(rec: BenchRecord) -> None:
        click.echo(f"workload {rec.workload}: prove {rec.prover_time_s:.2f}s verify {rec.verifier_time_s * 1e3:.2f}ms",
                   err=True)

    try:
        records = bench(_ints(workloads), _shape(shape), repetitions, backend, seed, txs_per_block,
                        on_record=progress)
    except (ShapeTooSmall, ValueError) as exc:
        raise click.UsageError(str(exc)) from None
    _emit(to_csv(records), out)


@main.command("matrix")
@backend_opt
@click.option("--shape", default="4,3", show_default=True, help="batch capacity,tree depth")
@click.option("--ns", default="2,3,5", show_default=True, help="full-node set sizes")
@click.option("--seed", type=int, default=7, show_default=True)
@out_opt
def matrix_cmd(backend, shape, ns, seed, out) -> None:
    """JSON report of every (oracle mode, node mode, n) cell; exits 1 on a taxonomy violation."""
    report: ScenarioReport = matrix(MatrixConfig(backend=backend, shape=_shape(shape), ns=_ints(ns), seed=seed))
    _emit(report.dumps(), out)
    if report.violations:
        sys.exit(1)


__all__ = ["main"]
