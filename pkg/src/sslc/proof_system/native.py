"""Backend that checks each step directly and chains a hash transcript over public inputs.

It enforces the same constraints as the succinct circuit but its "proofs" are only tags:
anyone can recompute them, so they bind public inputs without being unforgeable. Useful
for exercising protocol logic quickly.
"""

from __future__ import annotations

import json
import time
from typing import Optional

from ..field_merkle import Digest, domain_tag, fold_paths_batch, hash_bytes, hash_elements, parameter_bytes
from ..field_merkle.field import MODULUS
from ..query_engine import QuerySpec
from ..statement import Batch, Claim, StepStatement, advance
from .core import (
    FINAL,
    STEP,
    BackendParams,
    InvalidPredecessor,
    MalformedProof,
    Proof,
    ShapeTooSmall,
    WitnessUnsatisfiable,
    check_reduce_target,
    check_shape,
    final_inputs,
)

TAG_TRANSCRIPT = domain_tag("transcript")
TAG_PARAMS = domain_tag("params")
NAME = "native"


def _digest_bytes(d: Digest) -> bytes:
    return b"".join(e.to_bytes(8, "little") for e in d.elements)


def _bytes_digest(raw: bytes) -> Digest:
    return Digest(tuple(int.from_bytes(raw[8 * i : 8 * i + 8], "little") for i in range(4)))


def _tag(params: BackendParams, kind: str, public_inputs, prev_tag: Digest) -> Digest:
    kind_code = 0 if kind == STEP else 1
    return hash_elements(
        list(params.parameter_digest.elements) + [kind_code, len(public_inputs)]
        + [int(x) % MODULUS for x in public_inputs] + list(prev_tag.elements),
        TAG_TRANSCRIPT,
    )


class NativeBackend:
    name = NAME

    def setup(self, batch_capacity: int, tree_depth: int) -> BackendParams:
        check_shape(batch_capacity, tree_depth)
        shape = json.dumps({"backend": NAME, "batch_capacity": batch_capacity, "tree_depth": tree_depth},
                           sort_keys=True).encode()
        digest = hash_bytes(parameter_bytes() + shape, TAG_PARAMS)
        return BackendParams(NAME, batch_capacity, tree_depth, digest)

    # transcript proofs carry (prev_tag, tag)
    def _emit(self, params: BackendParams, kind: str, pis: list[int], prev_tag: Digest, t0: float) -> Proof:
        tag = _tag(params, kind, pis, prev_tag)
        return Proof(kind, _digest_bytes(prev_tag) + _digest_bytes(tag), tuple(pis), NAME,
                     params.parameter_digest, time.perf_counter() - t0)

    def _authentic(self, params: BackendParams, proof: Proof, kind: str, pis) -> bool:
        if proof.kind != kind or proof.backend != NAME or proof.parameter_digest != params.parameter_digest:
            return False
        if len(proof.data) != 64:
            return False
        try:
            prev_tag, tag = _bytes_digest(proof.data[:32]), _bytes_digest(proof.data[32:])
        except ValueError:
            return False
        return _tag(params, kind, pis, prev_tag) == tag

    def _check_batch(self, params: BackendParams, prev: Optional[StepStatement], batch: Batch, spec: QuerySpec) -> None:
        if not 1 <= len(batch) <= params.batch_capacity:
            raise WitnessUnsatisfiable(f"batch size {len(batch)} outside 1..{params.batch_capacity}")
        if len(batch.paths) != len(batch.transactions):
            raise WitnessUnsatisfiable("paths and transactions differ in length")
        if not 0 <= batch.block_index < 2**32:
            raise WitnessUnsatisfiable("block index out of range")
        for p in batch.paths:
            if len(p.siblings) > params.tree_depth:
                raise ShapeTooSmall(f"opening has {len(p.siblings)} levels, circuit supports {params.tree_depth}")
        new_block = batch.carry_in_hash is None
        if prev is None and not new_block:
            raise WitnessUnsatisfiable("the first batch must open a block")
        if prev is not None:
            if tuple(spec.elements()) != prev.spec:
                raise WitnessUnsatisfiable("spec differs from the predecessor's")
            if new_block and batch.block_index <= prev.block_index:
                raise WitnessUnsatisfiable("blocks must be strictly increasing")
            if not new_block and (batch.block_index != prev.block_index or batch.root != prev.root):
                raise WitnessUnsatisfiable("continuation batch changes block")
        folded = fold_paths_batch([tx.tx_hash for tx in batch.transactions], list(batch.paths))
        if any(r != batch.root for r in folded):
            raise WitnessUnsatisfiable("an opening does not reach the batch root")
        if not all(spec.matches(tx) for tx in batch.transactions):
            raise WitnessUnsatisfiable("a transaction fails the predicate")
        last = None if new_block else prev.carry
        for tx in batch.transactions:
            if last is not None and not last < tx.tx_hash:
                raise WitnessUnsatisfiable("transactions not strictly ascending by hash")
            last = tx.tx_hash

    def prove_base(self, params: BackendParams, batch: Batch, spec: QuerySpec) -> Proof:
        t0 = time.perf_counter()
        self._check_batch(params, None, batch, spec)
        return self._emit(params, STEP, advance(None, batch, spec).elements(), Digest.zero(), t0)

    def prove_step(self, params: BackendParams, prev: Proof, batch: Batch, spec: QuerySpec) -> Proof:
        t0 = time.perf_counter()
        if not self.verify_step(params, prev):
            raise InvalidPredecessor("predecessor proof does not verify")
        state = prev.statement
        self._check_batch(params, state, batch, spec)
        return self._emit(params, STEP, advance(state, batch, spec).elements(), _bytes_digest(prev.data[32:]), t0)

    def prove_reduce(self, params: BackendParams, last_step: Proof, claim: Claim) -> Proof:
        t0 = time.perf_counter()
        if not self.verify_step(params, last_step):
            raise InvalidPredecessor("last step proof does not verify")
        check_reduce_target(last_step, claim)
        pis = final_inputs(last_step.statement)
        return self._emit(params, FINAL, pis, _bytes_digest(last_step.data[32:]), t0)

    def verify_step(self, params: BackendParams, proof: Proof) -> bool:
        try:
            return self._authentic(params, proof, STEP, proof.public_inputs)
        except (MalformedProof, ValueError):
            return False

    def verify(self, params: BackendParams, proof: Proof, claim: Claim) -> bool:
        try:
            return self._authentic(params, proof, FINAL, claim.public_inputs())
        except (MalformedProof, ValueError):
            return False
