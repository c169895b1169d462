"""Public claim, private witness, and the native checker for the membership-and-fold relation.

The checker is the reference the proof backends are held to: a proof should exist for a
(claim, witness) pair exactly when ``check_relation`` accepts it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .field_merkle import Digest, MerklePath, domain_tag, fold_paths_batch, hash_elements
from .field_merkle.field import MODULUS
from .ledger import Chain, Transaction
from .query_engine import PartialResult, QuerySpec, finalize_pair, map_block

TAG_ROOTS_ACC = domain_tag("roots_acc")


class Reason(str, enum.Enum):
    OK = "OK"
    RESULT_MISMATCH = "RESULT_MISMATCH"
    COUNT_MISMATCH = "COUNT_MISMATCH"
    BAD_PATH = "BAD_PATH"
    ORDER_VIOLATION = "ORDER_VIOLATION"
    PREDICATE_VIOLATION = "PREDICATE_VIOLATION"


@dataclass(frozen=True)
class RelationCheck:
    ok: bool
    reason: Reason
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def roots_accumulator(roots: Sequence[tuple[int, Digest]]) -> Digest:
    """Sequential hash chain over (block_index, root), starting from the zero digest."""
    acc = Digest.zero()
    for index, root in roots:
        acc = hash_elements(list(acc.elements) + [index] + list(root.elements), TAG_ROOTS_ACC)
    return acc


@dataclass(frozen=True)
class Claim:
    roots: tuple[tuple[int, Digest], ...]
    k: int
    result: tuple[int, int]
    spec_digest: Digest

    def __post_init__(self) -> None:
        object.__setattr__(self, "roots", tuple((int(i), d) for i, d in self.roots))
        object.__setattr__(self, "result", (int(self.result[0]), int(self.result[1])))

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.roots]

    def well_formed(self) -> bool:
        idx = self.indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            return False
        if idx and not 0 <= idx[0]:
            return False
        return self.k >= 0 and (self.k == 0 or bool(self.roots)) and self.result[1] > 0

    def roots_acc(self) -> Digest:
        return roots_accumulator(self.roots)

    def public_inputs(self) -> list[int]:
        """Field elements the final proof commits to, in backend order."""
        num, den = self.result
        return (
            list(self.roots_acc().elements)
            + [self.k % MODULUS, num % MODULUS, den % MODULUS]
            + list(self.spec_digest.elements)
        )

    def to_json(self) -> dict:
        return {
            "roots": [{"index": i, "digest": d.hex()} for i, d in self.roots],
            "k": self.k,
            "result": {"numerator": self.result[0], "denominator": self.result[1]},
            "spec_digest": self.spec_digest.hex(),
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), separators=(",", ":"), sort_keys=True).encode()

    @classmethod
    def from_json(cls, obj: dict) -> "Claim":
        return cls(
            roots=tuple((int(r["index"]), Digest.from_hex(r["digest"])) for r in obj["roots"]),
            k=int(obj["k"]),
            result=(int(obj["result"]["numerator"]), int(obj["result"]["denominator"])),
            spec_digest=Digest.from_hex(obj["spec_digest"]),
        )


@dataclass(frozen=True)
class ChainView:
    roots: tuple[tuple[int, Digest], ...]
    k: int

    @classmethod
    def of(cls, claim: Claim) -> "ChainView":
        return cls(roots=claim.roots, k=claim.k)

    def to_json(self) -> dict:
        return {"roots": [{"index": i, "digest": d.hex()} for i, d in self.roots], "k": self.k}

    @classmethod
    def from_json(cls, obj: dict) -> "ChainView":
        return cls(
            roots=tuple((int(r["index"]), Digest.from_hex(r["digest"])) for r in obj["roots"]),
            k=int(obj["k"]),
        )


@dataclass(frozen=True)
class Batch:
    """Relevant transactions of one block (or one slice of it) with their openings.

    ``root`` names the block root the openings are checked against; ``carry_in_hash`` is the
    last tx_hash of the preceding slice of the same block, or None for a block's first slice.
    """

    block_index: int
    root: Digest
    transactions: tuple[Transaction, ...]
    paths: tuple[MerklePath, ...]
    carry_in_hash: Optional[Digest] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "transactions", tuple(self.transactions))
        object.__setattr__(self, "paths", tuple(self.paths))

    def __len__(self) -> int:
        return len(self.transactions)

    @property
    def last_hash(self) -> Optional[Digest]:
        return self.transactions[-1].tx_hash if self.transactions else self.carry_in_hash

    def to_json(self) -> dict:
        return {
            "block_index": self.block_index,
            "root": self.root.hex(),
            "transactions": [tx.to_json() for tx in self.transactions],
            "paths": [p.to_json() for p in self.paths],
            "carry_in_hash": None if self.carry_in_hash is None else self.carry_in_hash.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Batch":
        carry = obj.get("carry_in_hash")
        return cls(
            block_index=int(obj["block_index"]),
            root=Digest.from_hex(obj["root"]),
            transactions=tuple(Transaction.from_json(t) for t in obj["transactions"]),
            paths=tuple(MerklePath.from_json(p) for p in obj["paths"]),
            carry_in_hash=None if carry is None else Digest.from_hex(carry),
        )


@dataclass(frozen=True)
class Witness:
    batches: tuple[Batch, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "batches", tuple(self.batches))

    @property
    def transactions(self) -> list[Transaction]:
        return [tx for b in self.batches for tx in b.transactions]


def split_block(
    block_index: int, root: Digest, relevant: Sequence[tuple[Transaction, MerklePath]], capacity: Optional[int]
) -> list[Batch]:
    """Slice one block's sorted relevant list into batches of at most ``capacity``."""
    step = capacity or max(1, len(relevant))
    out: list[Batch] = []
    carry: Optional[Digest] = None
    for start in range(0, len(relevant), step):
        chunk = relevant[start : start + step]
        out.append(Batch(block_index, root, tuple(t for t, _ in chunk), tuple(p for _, p in chunk), carry))
        carry = chunk[-1][0].tx_hash
    return out


def build_claim(chain: Chain, spec: QuerySpec, batch_capacity: Optional[int] = None) -> tuple[Claim, Witness]:
    """Honest claim and witness; batches never span two blocks."""
    total = PartialResult()
    roots: list[tuple[int, Digest]] = []
    batches: list[Batch] = []
    for block in chain.blocks:
        partial, relevant = map_block(block, spec)
        if not relevant:
            continue
        total = total + partial
        roots.append((block.index, block.tx_root))
        batches.extend(split_block(block.index, block.tx_root, relevant, batch_capacity))
    result = finalize_pair(spec, total)
    claim = Claim(roots=tuple(roots), k=total.count, result=result, spec_digest=spec.digest())
    return claim, Witness(tuple(batches))


def _fail(reason: Reason, detail: str) -> RelationCheck:
    return RelationCheck(False, reason, detail)


def check_relation(claim: Claim, witness: Witness, spec: QuerySpec) -> RelationCheck:
    """Decide the relation natively.

    Checks run in a fixed order (openings, predicate, ordering, count, result) so a mutation
    aimed at one condition reports that condition.
    """
    claimed = dict(claim.roots)
    if not claim.well_formed():
        return _fail(Reason.BAD_PATH, "claim roots not strictly increasing or claim malformed")

    # openings against the claimed roots
    leaves, paths, expected = [], [], []
    for bi, batch in enumerate(witness.batches):
        if not batch.transactions:
            return _fail(Reason.BAD_PATH, f"batch {bi} is empty")
        if len(batch.paths) != len(batch.transactions):
            return _fail(Reason.BAD_PATH, f"batch {bi} has {len(batch.paths)} paths for {len(batch)} txs")
        root = claimed.get(batch.block_index)
        if root is None or root != batch.root:
            return _fail(Reason.BAD_PATH, f"batch {bi} targets a root not in the claim")
        for tx, path in zip(batch.transactions, batch.paths):
            leaves.append(tx.tx_hash)
            paths.append(path)
            expected.append(root)
    folded = fold_paths_batch(leaves, paths)
    for n, (got, want) in enumerate(zip(folded, expected)):
        if got != want:
            return _fail(Reason.BAD_PATH, f"opening {n} does not reach its claimed root")
    covered = {b.block_index for b in witness.batches}
    if covered != set(claimed):
        return _fail(Reason.BAD_PATH, "claimed roots and witness blocks differ")

    # predicate, bound through the spec digest
    if claim.spec_digest != spec.digest():
        return _fail(Reason.PREDICATE_VIOLATION, "claim commits to a different query")
    for tx in witness.transactions:
        if not spec.matches(tx):
            return _fail(Reason.PREDICATE_VIOLATION, f"transaction {tx.tx_hash.hex()[:16]} does not match")

    # strict tx_hash order within a block, carried across its batches
    prev_block = -1
    last: Optional[Digest] = None
    for bi, batch in enumerate(witness.batches):
        if batch.block_index == prev_block:
            if batch.carry_in_hash is None or batch.carry_in_hash != last:
                return _fail(Reason.ORDER_VIOLATION, f"batch {bi} carry does not continue its block")
        else:
            if batch.block_index < prev_block:
                return _fail(Reason.ORDER_VIOLATION, f"batch {bi} goes back to an earlier block")
            if batch.carry_in_hash is not None:
                return _fail(Reason.ORDER_VIOLATION, f"batch {bi} opens a block with a carry")
            last = None
        for tx in batch.transactions:
            if last is not None and not last < tx.tx_hash:
                return _fail(Reason.ORDER_VIOLATION, f"batch {bi} is not strictly ascending")
            last = tx.tx_hash
        prev_block = batch.block_index

    txs = witness.transactions
    if len(txs) != claim.k:
        return _fail(Reason.COUNT_MISMATCH, f"witness has {len(txs)} transactions, claim says {claim.k}")

    total = PartialResult(sum(tx.amount for tx in txs), len(txs))
    try:
        pair = finalize_pair(spec, total)
    except ValueError:
        return _fail(Reason.RESULT_MISMATCH, "result undefined over an empty witness")
    if pair != claim.result:
        return _fail(Reason.RESULT_MISMATCH, f"fold gives {pair}, claim says {claim.result}")
    return RelationCheck(True, Reason.OK)


@dataclass(frozen=True)
class StepStatement:
    """Public inputs of one recursive step, as field elements."""

    spec: tuple[int, ...]
    roots_acc: Digest
    block_index: int
    root: Digest
    carry: Digest
    running_sum: int
    running_count: int
    step_index: int

    def elements(self) -> list[int]:
        return (
            list(self.spec)
            + list(self.roots_acc.elements)
            + [self.block_index]
            + list(self.root.elements)
            + list(self.carry.elements)
            + [self.running_sum % MODULUS, self.running_count % MODULUS, self.step_index]
        )

    @classmethod
    def from_elements(cls, els: Sequence[int]) -> "StepStatement":
        els = [int(e) for e in els]
        if len(els) < 24:
            raise ValueError("step statement needs 24 elements")
        return cls(
            spec=tuple(els[0:8]),
            roots_acc=Digest(tuple(els[8:12])),
            block_index=els[12],
            root=Digest(tuple(els[13:17])),
            carry=Digest(tuple(els[17:21])),
            running_sum=els[21],
            running_count=els[22],
            step_index=els[23],
        )

    def to_json(self) -> dict:
        return {"elements": self.elements()}

    @classmethod
    def from_json(cls, obj: dict) -> "StepStatement":
        return cls.from_elements(obj["elements"])


def initial_statement(spec: QuerySpec) -> StepStatement:
    """State a base step starts from; all zero apart from the spec."""
    z = Digest.zero()
    return StepStatement(tuple(spec.elements()), z, 0, z, z, 0, 0, 0)


def advance(prev: Optional[StepStatement], batch: Batch, spec: QuerySpec) -> StepStatement:
    """Public inputs a step over ``batch`` should expose, given its predecessor (None for the base)."""
    base = prev is None
    state = initial_statement(spec) if base else prev
    new_block = base or batch.carry_in_hash is None
    acc = state.roots_acc
    if new_block:
        acc = hash_elements(list(acc.elements) + [batch.block_index] + list(batch.root.elements), TAG_ROOTS_ACC)
    return StepStatement(
        spec=state.spec,
        roots_acc=acc,
        block_index=batch.block_index,
        root=batch.root,
        carry=batch.transactions[-1].tx_hash,
        running_sum=(state.running_sum + sum(tx.amount for tx in batch.transactions)) % MODULUS,
        running_count=state.running_count + len(batch.transactions),
        step_index=state.step_index + 1,
    )


__all__ = [
    "Batch",
    "ChainView",
    "Claim",
    "Reason",
    "RelationCheck",
    "StepStatement",
    "Witness",
    "advance",
    "build_claim",
    "check_relation",
    "initial_statement",
    "roots_accumulator",
    "split_block",
]
