"""Oracle server: evaluates a query, proves it, and optionally misbehaves."""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Optional

from ..field_merkle import Digest
from ..ledger import Block, Chain, Transaction
from ..proof_system import BackendParams, Proof, ProofSystemError, prove_witness
from ..query_engine import EmptyQuery, PartialResult, QueryResult, QuerySpec, finalize_pair
from ..statement import ChainView, Claim, Witness, build_claim
from .behavior import OracleBehavior, OracleMode
from .fullnode import perturb
from .models import ChainViewModel, QueryRequest, QueryResponse, ResultModel, RootModel


class QueryRejected(ValueError):
    pass


@dataclass(frozen=True)
class Answer:
    result: QueryResult
    view: ChainView
    proof: Proof

    def to_model(self, params: BackendParams) -> QueryResponse:
        return QueryResponse(
            result=ResultModel(numerator=self.result.value_numerator,
                               denominator=self.result.value_denominator, k=self.result.k),
            chain_view=ChainViewModel(
                roots=[RootModel(index=i, digest=d.hex()) for i, d in self.view.roots], k=self.view.k),
            proof=self.proof.to_base64(),
            parameter_digest=params.parameter_digest.hex(),
        )


def _answer(claim: Claim, proof: Proof) -> Answer:
    return Answer(QueryResult(claim.result[0], claim.result[1], claim.k), ChainView.of(claim), proof)


def _reclaim(witness: Witness, spec: QuerySpec) -> Claim:
    """Claim matching an arbitrary (possibly dishonest) witness."""
    txs = witness.transactions
    total = PartialResult(sum(t.amount for t in txs), len(txs))
    roots: list[tuple[int, Digest]] = []
    for b in witness.batches:
        if not roots or roots[-1][0] != b.block_index:
            roots.append((b.block_index, b.root))
    return Claim(tuple(roots), total.count, finalize_pair(spec, total), spec.digest())


class Oracle:
    def __init__(self, chain: Chain, params: BackendParams, behavior: Optional[OracleBehavior] = None) -> None:
        self.chain = chain
        self.params = params
        self.behavior = behavior or OracleBehavior()
        self._honest: dict[bytes, tuple[Claim, Witness, Proof]] = {}
        self._lock = threading.Lock()

    def honest(self, spec: QuerySpec) -> tuple[Claim, Witness, Proof]:
        key = spec.to_bytes()
        with self._lock:
            if key not in self._honest:
                try:
                    claim, witness = build_claim(self.chain, spec, self.params.batch_capacity)
                except EmptyQuery as exc:
                    raise QueryRejected(str(exc)) from exc
                if claim.k == 0:
                    raise QueryRejected("no matching transactions to prove")
                proof = prove_witness(self.params, claim, witness, spec)
                self._honest[key] = (claim, witness, proof)
            return self._honest[key]

    def answer(self, spec: QuerySpec) -> Answer:
        claim, witness, proof = self.honest(spec)
        mode, param = self.behavior.mode, self.behavior.param
        if mode is OracleMode.HONEST:
            return _answer(claim, proof)
        if mode is OracleMode.TAMPER_RESULT:
            return _answer(replace(claim, result=(claim.result[0] + param, claim.result[1])), proof)
        if mode is OracleMode.TAMPER_K:
            return _answer(replace(claim, k=claim.k + param), proof)
        if mode is OracleMode.TAMPER_ROOT:
            target = param if param in claim.indices else claim.indices[0]
            roots = tuple((i, perturb(d) if i == target else d) for i, d in claim.roots)
            return _answer(replace(claim, roots=roots), proof)
        if mode is OracleMode.OMIT_TX:
            return self._omit(spec, witness, param)
        if mode is OracleMode.DUPLICATE_TX:
            return self._duplicate(spec, claim, witness, proof)
        if mode is OracleMode.FOREIGN_TX:
            return self._foreign(spec, witness)
        raise ValueError(f"unhandled oracle mode {mode}")

    def handle(self, req: QueryRequest) -> QueryResponse:
        try:
            spec = QuerySpec.from_json(req.model_dump())
        except ValueError as exc:
            raise QueryRejected(str(exc)) from exc
        return self.answer(spec).to_model(self.params)

    def _omit(self, spec: QuerySpec, witness: Witness, n: int) -> Answer:
        """Drop the last ``n`` relevant transactions and prove the smaller, self-consistent claim."""
        batches = list(witness.batches)
        n = min(n, len(witness.transactions) - 1)
        while n > 0:
            last = batches[-1]
            take = min(n, len(last))
            if take == len(last):
                batches.pop()
            else:
                batches[-1] = replace(last, transactions=last.transactions[: len(last) - take],
                                      paths=last.paths[: len(last) - take])
            n -= take
        w = Witness(tuple(batches))
        claim = _reclaim(w, spec)
        return _answer(claim, prove_witness(self.params, claim, w, spec))

    def _duplicate(self, spec: QuerySpec, honest_claim: Claim, witness: Witness, honest_proof: Proof) -> Answer:
        """Count one transaction twice. Keeps k by dropping a neighbour when that changes the result,
        otherwise appends the copy. Proving fails on the order constraint, so the stale honest proof
        is sent with the forged claim."""
        claim = None
        for bi, b in enumerate(witness.batches):
            if len(b) >= 2:
                batches = list(witness.batches)
                batches[bi] = replace(b, transactions=b.transactions[:1] + b.transactions[:1] + b.transactions[2:],
                                      paths=b.paths[:1] + b.paths[:1] + b.paths[2:])
                forged = Witness(tuple(batches))
                claim = _reclaim(forged, spec)
                break
        if claim is None or claim == honest_claim:
            batches = list(witness.batches)
            b = batches[0]
            batches[0] = replace(b, transactions=b.transactions[:1] + b.transactions, paths=b.paths[:1] + b.paths)
            forged = Witness(tuple(batches))
            claim = _reclaim(forged, spec)
        try:
            proof = prove_witness(self.params, claim, forged, spec)
        except ProofSystemError:
            proof = honest_proof
        return _answer(claim, proof)

    def _foreign(self, spec: QuerySpec, witness: Witness) -> Answer:
        """Swap one relevant transaction for a fabricated one and forge its block root to match."""
        first = witness.batches[0]
        victim = first.transactions[0]
        fake = Transaction(victim.sender, victim.receiver, victim.amount + 1, victim.nonce + 2**40,
                           victim.payload_tag)
        block = self.chain.blocks[first.block_index]
        txs = tuple(fake if t.tx_hash == victim.tx_hash else t for t in block.transactions)
        forged_blocks = list(self.chain.blocks)
        forged_blocks[block.index] = Block.assemble(block.index, txs)
        forged_chain = Chain(tuple(forged_blocks))
        claim, w = build_claim(forged_chain, spec, self.params.batch_capacity)
        return _answer(claim, prove_witness(self.params, claim, w, spec))
