"""Full node: answers transaction counts per account and transaction roots per block."""

from __future__ import annotations

from functools import cached_property
from typing import Optional

from ..field_merkle import Digest
from ..field_merkle.field import MODULUS
from ..ledger import AccountId, Chain
from .behavior import NodeBehavior, NodeMode
from .models import CountRequest, CountResponse, RootEntry, RootsRequest, RootsResponse


class NodeUnavailable(RuntimeError):
    pass


def perturb(d: Digest) -> Digest:
    return Digest(((d.elements[0] + 1) % MODULUS,) + d.elements[1:])


class FullNode:
    def __init__(self, chain: Chain, behavior: Optional[NodeBehavior] = None, name: str = "node") -> None:
        self.chain = chain
        self.behavior = behavior or NodeBehavior()
        self.name = name

    @cached_property
    def _height(self) -> int:
        if self.behavior.mode is NodeMode.STALE_VIEW:
            return max(0, min(self.behavior.param, len(self.chain)))
        return len(self.chain)

    @cached_property
    def _index(self) -> dict[AccountId, dict[Optional[int], int]]:
        """account -> {None: total, tag: count with that tag} over the visible blocks."""
        out: dict[AccountId, dict[Optional[int], int]] = {}
        for block in self.chain.blocks[: self._height]:
            for tx in block.transactions:
                parties = {tx.sender, tx.receiver}
                for acc in parties:
                    slot = out.setdefault(acc, {None: 0})
                    slot[None] += 1
                    slot[tx.payload_tag] = slot.get(tx.payload_tag, 0) + 1
        return out

    def _check_up(self) -> None:
        if self.behavior.mode is NodeMode.UNAVAILABLE:
            raise NodeUnavailable(f"{self.name} is unavailable")

    def count(self, req: CountRequest) -> CountResponse:
        self._check_up()
        per_tag = self._index.get(AccountId.from_hex(req.account), {})
        n = per_tag.get(req.payload_tag, 0)
        if self.behavior.mode is NodeMode.WRONG_COUNT:
            n = max(0, n + self.behavior.param)
        return CountResponse(count=n)

    def roots(self, req: RootsRequest) -> RootsResponse:
        self._check_up()
        out = []
        for i in req.indices:
            if 0 <= i < self._height:
                d = self.chain.blocks[i].tx_root
                target = self.behavior.param
                if self.behavior.mode is NodeMode.WRONG_ROOT and (target is None or target == i):
                    d = perturb(d)
                out.append(RootEntry(index=i, digest=d.hex()))
            else:
                out.append(RootEntry(index=i, digest=None))
        return RootsResponse(roots=out)

    def get_count(self, account: AccountId, payload_tag: Optional[int] = None) -> int:
        return self.count(CountRequest(account=account.hex(), payload_tag=payload_tag)).count

    def get_roots(self, indices: list[int]) -> list[Optional[Digest]]:
        entries = self.roots(RootsRequest(indices=list(indices))).roots
        return [Digest.from_hex(e.digest) if e.digest is not None else None for e in entries]
