"""Client for the recursive-proof worker (Rust, plonky2) speaking JSON lines over stdin/stdout."""

from __future__ import annotations

import atexit
import base64
import json
import os
import shutil
import subprocess
import threading
from pathlib import Path
from typing import Optional

from ..field_merkle import domain_tag, hash_bytes, parameter_bytes
from ..query_engine import QuerySpec
from ..statement import Batch, Claim
from .core import (
    FINAL,
    STEP,
    BackendParams,
    BackendUnavailable,
    InvalidPredecessor,
    Proof,
    ProofSystemError,
    UnsupportedShape,
    WitnessUnsatisfiable,
    check_reduce_target,
    check_shape,
    path_bits,
)

NAME = "plonky2"
ENV_BIN = "SSLC_BACKEND_BIN"
TAG_PARAMS = domain_tag("params")
_CRATE = Path(__file__).resolve().parents[3] / "rust" / "sslc-backend"


def crate_dir() -> Path:
    return Path(os.environ.get("SSLC_BACKEND_CRATE", _CRATE))


def locate_binary() -> Optional[Path]:
    env = os.environ.get(ENV_BIN)
    if env:
        return Path(env) if Path(env).exists() else None
    candidate = crate_dir() / "target" / "release" / "sslc-backend"
    return candidate if candidate.exists() else None


def build_binary() -> Path:
    """Compile the worker with cargo. plonky2 needs nightly features, unlocked via RUSTC_BOOTSTRAP."""
    if shutil.which("cargo") is None:
        raise BackendUnavailable("cargo not found; cannot build the proof worker")
    env = dict(os.environ, RUSTC_BOOTSTRAP="1")
    proc = subprocess.run(
        ["cargo", "build", "--release", "--quiet"], cwd=crate_dir(), env=env, capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise BackendUnavailable(f"cargo build failed:\n{proc.stderr[-2000:]}")
    path = locate_binary()
    if path is None:
        raise BackendUnavailable("build finished but the worker binary is missing")
    return path


class Worker:
    """One long-lived worker process; requests are serialized by a lock."""

    def __init__(self, binary: Path) -> None:
        self.binary = binary
        self._lock = threading.Lock()
        self._proc: Optional[subprocess.Popen] = None

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                [str(self.binary)], stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1,
            )
        return self._proc

    def request(self, payload: dict) -> dict:
        with self._lock:
            proc = self._start()
            try:
                proc.stdin.write(json.dumps(payload, separators=(",", ":")) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                self._proc = None
                raise BackendUnavailable(f"worker pipe failed: {exc}") from exc
            if not line:
                self._proc = None
                raise BackendUnavailable("worker exited unexpectedly")
            return json.loads(line)

    @property
    def pid(self) -> Optional[int]:
        """Worker process id, starting it if needed."""
        with self._lock:
            return self._start().pid

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
            self._proc = None


_workers: dict[Path, Worker] = {}
_workers_lock = threading.Lock()


def shared_worker(binary: Optional[Path] = None, build: bool = True) -> Worker:
    path = binary or locate_binary()
    if path is None:
        if not build:
            raise BackendUnavailable("proof worker binary not found")
        path = build_binary()
    with _workers_lock:
        if path not in _workers:
            _workers[path] = Worker(path)
        return _workers[path]


@atexit.register
def _shutdown() -> None:
    for w in list(_workers.values()):
        w.close()


def available() -> bool:
    return locate_binary() is not None


def _raise_for(resp: dict) -> None:
    if resp.get("ok"):
        return
    kind, detail = resp.get("error"), resp.get("detail", "")
    if kind == "WitnessUnsatisfiable":
        raise WitnessUnsatisfiable(detail)
    if kind == "InvalidPredecessor":
        raise InvalidPredecessor(detail)
    if "UnsupportedShape" in str(detail):
        raise UnsupportedShape(detail)
    raise ProofSystemError(f"{kind}: {detail}")


class Plonky2Backend:
    name = NAME
    last_verify_s: Optional[float] = None

    def __init__(self, binary: Optional[Path] = None, build: bool = True) -> None:
        self.worker = shared_worker(binary, build=build)

    def _shape(self, params: BackendParams) -> dict:
        return {"batch_capacity": params.batch_capacity, "tree_depth": params.tree_depth}

    def setup(self, batch_capacity: int, tree_depth: int) -> BackendParams:
        check_shape(batch_capacity, tree_depth)
        resp = self.worker.request({"cmd": "setup", "batch_capacity": batch_capacity, "tree_depth": tree_depth})
        _raise_for(resp)
        described = {k: resp[k] for k in (
            "batch_capacity", "tree_depth", "step_circuit_digest", "reduce_circuit_digest")}
        blob = json.dumps({"backend": NAME, **described}, sort_keys=True).encode()
        digest = hash_bytes(parameter_bytes() + blob, TAG_PARAMS)
        return BackendParams(NAME, batch_capacity, tree_depth, digest, details=resp)

    def permute(self, state: list[int]) -> list[int]:
        resp = self.worker.request({"cmd": "permute", "state": list(state)})
        _raise_for(resp)
        return resp["state"]

    def _batch_json(self, params: BackendParams, batch: Batch, spec: QuerySpec) -> dict:
        if len(batch.paths) != len(batch.transactions):
            raise WitnessUnsatisfiable("paths and transactions differ in length")
        if not 0 <= batch.block_index < 2**32:
            raise WitnessUnsatisfiable("block index out of range")
        txs = []
        for tx, path in zip(batch.transactions, batch.paths):
            enc = path_bits(path.leaf_index, path.siblings, params.tree_depth)
            enc["limbs"] = tx.limbs()
            txs.append(enc)
        return {
            "block_index": batch.block_index,
            "root": list(batch.root.elements),
            "new_block": batch.carry_in_hash is None,
            "spec": spec.elements(),
            "txs": txs,
        }

    @staticmethod
    def _wire(proof: Proof) -> dict:
        return {"proof": base64.b64encode(proof.data).decode(), "public_inputs": list(proof.public_inputs)}

    def _proof(self, params: BackendParams, kind: str, resp: dict) -> Proof:
        _raise_for(resp)
        return Proof(kind, base64.b64decode(resp["proof"]), tuple(resp["public_inputs"]), NAME,
                     params.parameter_digest, float(resp.get("elapsed_s", 0.0)))

    def _check_batch_size(self, params: BackendParams, batch: Batch) -> None:
        if not 1 <= len(batch) <= params.batch_capacity:
            raise WitnessUnsatisfiable(f"batch size {len(batch)} outside 1..{params.batch_capacity}")

    def prove_base(self, params: BackendParams, batch: Batch, spec: QuerySpec) -> Proof:
        self._check_batch_size(params, batch)
        req = {"cmd": "prove_base", **self._shape(params), "batch": self._batch_json(params, batch, spec)}
        return self._proof(params, STEP, self.worker.request(req))

    def prove_step(self, params: BackendParams, prev: Proof, batch: Batch, spec: QuerySpec) -> Proof:
        self._check_batch_size(params, batch)
        if prev.kind != STEP or prev.parameter_digest != params.parameter_digest:
            raise InvalidPredecessor("predecessor is not a step proof under these parameters")
        req = {"cmd": "prove_step", **self._shape(params), "prev": self._wire(prev),
               "batch": self._batch_json(params, batch, spec)}
        return self._proof(params, STEP, self.worker.request(req))

    def prove_reduce(self, params: BackendParams, last_step: Proof, claim: Claim) -> Proof:
        if last_step.kind != STEP or last_step.parameter_digest != params.parameter_digest:
            raise InvalidPredecessor("last proof is not a step proof under these parameters")
        check_reduce_target(last_step, claim)
        req = {"cmd": "prove_reduce", **self._shape(params), "last": self._wire(last_step)}
        return self._proof(params, FINAL, self.worker.request(req))

    def _verify(self, params: BackendParams, proof: Proof, kind: str, pis) -> bool:
        if proof.kind != kind or proof.backend != NAME or proof.parameter_digest != params.parameter_digest:
            return False
        req = {"cmd": "verify" if kind == FINAL else "verify_step", **self._shape(params),
               "proof": {"proof": base64.b64encode(proof.data).decode(), "public_inputs": list(pis)}}
        resp = self.worker.request(req)
        self.last_verify_s = resp.get("elapsed_s")
        return bool(resp.get("ok") and resp.get("valid"))

    def verify(self, params: BackendParams, proof: Proof, claim: Claim) -> bool:
        return self._verify(params, proof, FINAL, claim.public_inputs())

    def verify_step(self, params: BackendParams, proof: Proof) -> bool:
        return self._verify(params, proof, STEP, proof.public_inputs)
