"""Recursive proving of the relation as a linear chain of batch proofs plus a final reduce proof."""

from __future__ import annotations

import threading
from typing import Callable, Optional

from ..ledger import Chain
from ..query_engine import QueryResult, QuerySpec
from ..statement import Batch, ChainView, Claim, Witness, build_claim
from .core import (
    FINAL,
    MAGIC,
    STEP,
    Backend,
    BackendParams,
    BackendUnavailable,
    InvalidPredecessor,
    MalformedProof,
    Proof,
    ProofSystemError,
    ShapeTooSmall,
    UnsupportedShape,
    WitnessUnsatisfiable,
)
from .native import NativeBackend

_backends: dict[str, Backend] = {}
_lock = threading.Lock()


def get_backend(name: str = "native") -> Backend:
    with _lock:
        if name not in _backends:
            if name == "native":
                _backends[name] = NativeBackend()
            elif name == "plonky2":
                from .plonky2 import Plonky2Backend

                _backends[name] = Plonky2Backend()
            else:
                raise ValueError(f"unknown backend {name!r}")
        return _backends[name]


def setup(batch_capacity: int, tree_depth: int, backend: str = "native") -> BackendParams:
    return get_backend(backend).setup(batch_capacity, tree_depth)


def prove_base(params: BackendParams, batch: Batch, spec: QuerySpec) -> Proof:
    return get_backend(params.backend).prove_base(params, batch, spec)


def prove_step(params: BackendParams, prev: Proof, batch: Batch, spec: QuerySpec) -> Proof:
    return get_backend(params.backend).prove_step(params, prev, batch, spec)


def prove_reduce(params: BackendParams, last_step: Proof, claim: Claim) -> Proof:
    return get_backend(params.backend).prove_reduce(params, last_step, claim)


def verify(params: BackendParams, proof: Proof, claim: Claim) -> bool:
    if proof.backend != params.backend:
        return False
    return get_backend(params.backend).verify(params, proof, claim)


def verify_step(params: BackendParams, proof: Proof) -> bool:
    if proof.backend != params.backend:
        return False
    return get_backend(params.backend).verify_step(params, proof)


def required_depth(witness: Witness) -> int:
    return max((len(p.siblings) for b in witness.batches for p in b.paths), default=0)


def prove_witness(
    params: BackendParams,
    claim: Claim,
    witness: Witness,
    spec: QuerySpec,
    on_step: Optional[Callable[[int, Proof], None]] = None,
) -> Proof:
    """Base proof over the first batch, one step per further batch, then the reduce proof."""
    if not witness.batches:
        raise WitnessUnsatisfiable("nothing to prove: the witness has no batches")
    if required_depth(witness) > params.tree_depth:
        raise ShapeTooSmall(f"witness needs tree depth {required_depth(witness)}, params have {params.tree_depth}")
    backend = get_backend(params.backend)
    proof = backend.prove_base(params, witness.batches[0], spec)
    if on_step:
        on_step(0, proof)
    for i, batch in enumerate(witness.batches[1:], 1):
        proof = backend.prove_step(params, proof, batch, spec)
        if on_step:
            on_step(i, proof)
    return backend.prove_reduce(params, proof, claim)


def prove_query(params: BackendParams, chain: Chain, spec: QuerySpec) -> tuple[QueryResult, ChainView, Proof]:
    claim, witness = build_claim(chain, spec, params.batch_capacity)
    proof = prove_witness(params, claim, witness, spec)
    result = QueryResult(claim.result[0], claim.result[1], claim.k)
    return result, ChainView.of(claim), proof


__all__ = [
    "FINAL",
    "MAGIC",
    "STEP",
    "Backend",
    "BackendParams",
    "BackendUnavailable",
    "InvalidPredecessor",
    "MalformedProof",
    "NativeBackend",
    "Proof",
    "ProofSystemError",
    "ShapeTooSmall",
    "UnsupportedShape",
    "WitnessUnsatisfiable",
    "get_backend",
    "prove_base",
    "prove_query",
    "prove_reduce",
    "prove_step",
    "prove_witness",
    "required_depth",
    "setup",
    "verify",
    "verify_step",
]
