"""Map-reduce queries over the chain: per-block map, order-free reduce, and a brute-force evaluator."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .field_merkle import Digest, MerklePath, domain_tag, hash_elements
from .ledger import AccountId, Block, Chain, Transaction

TAG_SPEC = domain_tag("spec")


class EmptyQuery(ValueError):
    """An average over zero transactions was requested."""


class Predicate(str, enum.Enum):
    ACCOUNT_TOUCH = "ACCOUNT_TOUCH"
    # account touch narrowed to one payload tag (votes sent to a contract)
    PAYLOAD_TAG = "PAYLOAD_TAG"


class MapKind(str, enum.Enum):
    SUM_AMOUNT_AND_COUNT = "SUM_AMOUNT_AND_COUNT"


class ReduceKind(str, enum.Enum):
    FOLD_SUM_COUNT = "FOLD_SUM_COUNT"


class Finalize(str, enum.Enum):
    AVERAGE = "AVERAGE"
    TOTAL = "TOTAL"
    COUNT = "COUNT"


_PREDICATE_CODE = {Predicate.ACCOUNT_TOUCH: 0, Predicate.PAYLOAD_TAG: 1}
_FINALIZE_CODE = {Finalize.AVERAGE: 0, Finalize.TOTAL: 1, Finalize.COUNT: 2}


@dataclass(frozen=True)
class QuerySpec:
    account: AccountId
    predicate: Predicate = Predicate.ACCOUNT_TOUCH
    finalize: Finalize = Finalize.AVERAGE
    payload_tag: Optional[int] = None
    map_kind: MapKind = MapKind.SUM_AMOUNT_AND_COUNT
    reduce_kind: ReduceKind = ReduceKind.FOLD_SUM_COUNT

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicate", Predicate(self.predicate))
        object.__setattr__(self, "finalize", Finalize(self.finalize))
        object.__setattr__(self, "map_kind", MapKind(self.map_kind))
        object.__setattr__(self, "reduce_kind", ReduceKind(self.reduce_kind))
        if self.predicate is Predicate.PAYLOAD_TAG:
            if self.payload_tag is None or not 0 <= self.payload_tag < 2**32:
                raise ValueError("PAYLOAD_TAG predicate needs a 32-bit payload_tag")
        elif self.payload_tag is not None:
            raise ValueError("payload_tag only applies to the PAYLOAD_TAG predicate")

    def matches(self, tx: Transaction) -> bool:
        if not tx.touches(self.account):
            return False
        return self.predicate is Predicate.ACCOUNT_TOUCH or tx.payload_tag == self.payload_tag

    def elements(self) -> list[int]:
        """The 8 field elements the circuit sees: kind, account limbs, tag, finalize."""
        return (
            [_PREDICATE_CODE[self.predicate]]
            + self.account.limbs()
            + [self.payload_tag or 0, _FINALIZE_CODE[self.finalize]]
        )

    def digest(self) -> Digest:
        return hash_elements(self.elements(), TAG_SPEC)

    def to_json(self) -> dict:
        out = {
            "predicate": self.predicate.value,
            "map_kind": self.map_kind.value,
            "reduce_kind": self.reduce_kind.value,
            "finalize": self.finalize.value,
            "account": self.account.hex(),
        }
        if self.payload_tag is not None:
            out["payload_tag"] = self.payload_tag
        return out

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_json(), separators=(",", ":"), sort_keys=True).encode()

    @classmethod
    def from_json(cls, obj: dict) -> "QuerySpec":
        return cls(
            account=AccountId.from_hex(obj["account"]),
            predicate=Predicate(obj.get("predicate", Predicate.ACCOUNT_TOUCH.value)),
            finalize=Finalize(obj.get("finalize", Finalize.AVERAGE.value)),
            payload_tag=obj.get("payload_tag"),
            map_kind=MapKind(obj.get("map_kind", MapKind.SUM_AMOUNT_AND_COUNT.value)),
            reduce_kind=ReduceKind(obj.get("reduce_kind", ReduceKind.FOLD_SUM_COUNT.value)),
        )


def spec_digest(spec: QuerySpec) -> Digest:
    return spec.digest()


@dataclass(frozen=True)
class PartialResult:
    sum: int = 0
    count: int = 0

    def __post_init__(self) -> None:
        if self.sum < 0 or self.count < 0:
            raise ValueError("partial results are nonnegative")
        if self.count == 0 and self.sum != 0:
            raise ValueError("an empty partial must have zero sum")

    def __add__(self, other: "PartialResult") -> "PartialResult":
        return PartialResult(self.sum + other.sum, self.count + other.count)


@dataclass(frozen=True)
class QueryResult:
    value_numerator: int
    value_denominator: int
    k: int

    def __post_init__(self) -> None:
        if self.value_denominator <= 0:
            raise ValueError("denominator must be positive")

    @property
    def value(self) -> Fraction:
        return Fraction(self.value_numerator, self.value_denominator)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.value_numerator, self.value_denominator)

    def render(self, precision: int = 6) -> str:
        q, r = divmod(self.value_numerator, self.value_denominator)
        if precision <= 0:
            return str(q)
        frac = r * 10**precision // self.value_denominator
        return f"{q}.{frac:0{precision}d}"

    def to_json(self) -> dict:
        return {"numerator": self.value_numerator, "denominator": self.value_denominator, "k": self.k}

    @classmethod
    def from_json(cls, obj: dict) -> "QueryResult":
        return cls(int(obj["numerator"]), int(obj["denominator"]), int(obj["k"]))


def relevant_positions(block: Block, spec: QuerySpec) -> list[int]:
    """Positions of matching transactions, ordered by ascending tx_hash."""
    pos = [i for i, tx in enumerate(block.transactions) if spec.matches(tx)]
    pos.sort(key=lambda i: block.transactions[i].tx_hash)
    return pos


def map_block(block: Block, spec: QuerySpec) -> tuple[PartialResult, list[tuple[Transaction, MerklePath]]]:
    pos = relevant_positions(block, spec)
    relevant = [(block.transactions[i], block.open(i)) for i in pos]
    total = sum(tx.amount for tx, _ in relevant)
    return PartialResult(total, len(relevant)), relevant


def finalize_pair(spec: QuerySpec, total: PartialResult) -> tuple[int, int]:
    if spec.finalize is Finalize.AVERAGE:
        if total.count == 0:
            raise EmptyQuery("average over zero matching transactions")
        return total.sum, total.count
    if spec.finalize is Finalize.TOTAL:
        return total.sum, 1
    return total.count, 1


def reduce_all(partials: Iterable[PartialResult], spec: QuerySpec) -> QueryResult:
    total = PartialResult()
    for p in partials:
        total = total + p
    num, den = finalize_pair(spec, total)
    return QueryResult(num, den, total.count)


def evaluate_native(chain: Chain, spec: QuerySpec) -> QueryResult:
    partials = []
    for block in chain.blocks:
        txs = [tx for tx in block.transactions if spec.matches(tx)]
        partials.append(PartialResult(sum(tx.amount for tx in txs), len(txs)))
    return reduce_all(partials, spec)


def count_matching(chain: Chain, spec: QuerySpec) -> int:
    return sum(1 for b in chain.blocks for tx in b.transactions if spec.matches(tx))


__all__ = [
    "EmptyQuery",
    "Finalize",
    "MapKind",
    "PartialResult",
    "Predicate",
    "QueryResult",
    "QuerySpec",
    "ReduceKind",
    "count_matching",
    "evaluate_native",
    "finalize_pair",
    "map_block",
    "reduce_all",
    "relevant_positions",
    "spec_digest",
]
