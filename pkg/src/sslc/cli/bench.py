"""Prover/verifier benchmark over growing workloads at a fixed circuit shape."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
import tracemalloc
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..ledger import AccountId, Chain, generate_chain
from ..proof_system import BackendParams, ShapeTooSmall, get_backend, prove_witness, setup, verify
from ..query_engine import Finalize, Predicate, QuerySpec
from ..statement import build_claim

BENCH_ACCOUNT = AccountId.from_label("bench")


@dataclass(frozen=True)
class BenchRecord:
    workload: int
    backend: str
    proof_size_bytes: int
    prover_time_s: float
    prover_mem_bytes: int
    verifier_time_s: float
    verifier_mem_bytes: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BenchRecord.columns(), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(asdict(r))
    return buf.getvalue()


def from_csv(text: str) -> list[BenchRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(BenchRecord(
            int(row["workload"]), row["backend"], int(row["proof_size_bytes"]), float(row["prover_time_s"]),
            int(row["prover_mem_bytes"]), float(row["verifier_time_s"]), int(row["verifier_mem_bytes"]),
        ))
    return out


class _Meter:
    """Peak memory of one measured region. The proving worker is a separate process, so its
    high-water mark is reset through /proc before the region and read after it."""

    def __init__(self, backend: str) -> None:
        self.pid = None
        if backend == "plonky2":
            self.pid = get_backend("plonky2").worker.pid

    def __enter__(self) -> "_Meter":
        self.peak = 0
        if self.pid is None:
            tracemalloc.start()
        else:
            try:
                Path(f"/proc/{self.pid}/clear_refs").write_text("5")
            except OSError:
                pass
        return self

    def __exit__(self, *exc) -> None:
        if self.pid is None:
            self.peak = tracemalloc.get_traced_memory()[1]
            tracemalloc.stop()
            return
        try:
            for line in Path(f"/proc/{self.pid}/status").read_text().splitlines():
                if line.startswith("VmHWM:"):
                    self.peak = int(line.split()[1]) * 1024
        except OSError:
            self.peak = 0


def workload_chain(workload: int, batch_capacity: int, txs_per_block: int, seed: int,
                   account: AccountId = BENCH_ACCOUNT) -> Chain:
    """Chain with exactly ``workload`` relevant txs packed ``batch_capacity`` to a block."""
    blocks = max(1, math.ceil(workload / batch_capacity))
    counts = [batch_capacity] * (blocks - 1) + [workload - batch_capacity * (blocks - 1)]
    return generate_chain(seed, blocks, txs_per_block, counts, account)


def bench_spec(account: AccountId = BENCH_ACCOUNT) -> QuerySpec:
    return QuerySpec(account, Predicate.ACCOUNT_TOUCH, Finalize.AVERAGE)


def bench(
    workloads: Sequence[int],
    shape: tuple[int, int] = (100, 12),
    repetitions: int = 1,
    backend: str = "native",
    seed: int = 0,
    txs_per_block: Optional[int] = None,
    verify_repetitions: int = 5,
    params: Optional[BackendParams] = None,
    on_record: Optional[Callable[[BenchRecord], None]] = None,
) -> list[BenchRecord]:
    """Median prover and verifier cost per workload."""
    workloads = list(workloads)
    if not workloads or any(w <= 0 for w in workloads):
        raise ValueError("workloads must be positive")
    if workloads != sorted(workloads):
        raise ValueError("workloads must be sorted ascending")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    cap, depth = shape
    tpb = txs_per_block or min(max(256, cap), 1 << depth)
    if tpb > (1 << depth):
        raise ShapeTooSmall(f"{tpb} txs per block need tree depth {math.ceil(math.log2(tpb))}, shape has {depth}")
    if min(workloads[-1], cap) > tpb:
        raise ShapeTooSmall(f"blocks of {tpb} txs cannot hold {min(workloads[-1], cap)} relevant txs")
    params = params or setup(cap, depth, backend)
    impl = get_backend(params.backend)
    spec = bench_spec()
    records = []
    for w in workloads:
        chain = workload_chain(w, cap, tpb, seed + w)
        claim, witness = build_claim(chain, spec, cap)
        prove_t, prove_m, ver_t, ver_m = [], [], [], []
        proof = None
        for _ in range(repetitions):
            with _Meter(params.backend) as m:
                t0 = time.perf_counter()
                proof = prove_witness(params, claim, witness, spec)
                prove_t.append(time.perf_counter() - t0)
            prove_m.append(m.peak)
            for _ in range(verify_repetitions):
                with _Meter(params.backend) as m:
                    t0 = time.perf_counter()
                    ok = verify(params, proof, claim)
                    wall = time.perf_counter() - t0
                if not ok:
                    raise RuntimeError(f"honest proof failed to verify at workload {w}")
                inner = getattr(impl, "last_verify_s", None)
                ver_t.append(inner if inner is not None else wall)
                ver_m.append(m.peak)
        rec = BenchRecord(
            workload=w,
            backend=params.backend,
            proof_size_bytes=proof.size_bytes,
            prover_time_s=statistics.median(prove_t),
            prover_mem_bytes=int(statistics.median(prove_m)),
            verifier_time_s=statistics.median(ver_t),
            verifier_mem_bytes=int(statistics.median(ver_m)),
        )
        records.append(rec)
        if on_record:
            on_record(rec)
    return records


__all__ = ["BENCH_ACCOUNT", "BenchRecord", "bench", "bench_spec", "from_csv", "to_csv", "workload_chain"]
