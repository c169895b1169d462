"""The canonical chain: accounts, transactions, blocks, fixtures and ground-truth lookups."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .field_merkle import TAG_TX_LEAF, Digest, MerklePath, TxTree, build_tree, open_path, root_of
from .field_merkle.poseidon import sponge_batch

LIMB_BITS = 62
LIMB_MASK = (1 << LIMB_BITS) - 1
ACCOUNT_LIMBS = 5  # 256 bits in 62-bit limbs
NUM_LIMBS = 2 * ACCOUNT_LIMBS + 2 + 2 + 1
MAX_AMOUNT = 10**6


class InvalidParams(ValueError):
    pass


class ChainFormatError(ValueError):
    pass


def _limbs(value: int, count: int) -> list[int]:
    return [(value >> (LIMB_BITS * i)) & LIMB_MASK for i in range(count)]


@dataclass(frozen=True, order=True)
class AccountId:
    id: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.id, (bytes, bytearray)) or len(self.id) != 32:
            raise ValueError("account id must be 32 bytes")
        object.__setattr__(self, "id", bytes(self.id))

    @classmethod
    def from_hex(cls, text: str) -> "AccountId":
        return cls(bytes.fromhex(text))

    @classmethod
    def from_label(cls, label: str) -> "AccountId":
        """Deterministic account for tests and fixtures (label padded into 32 bytes)."""
        raw = label.encode()
        if len(raw) > 32:
            raise ValueError("label longer than 32 bytes")
        return cls(raw.ljust(32, b"\0"))

    def hex(self) -> str:
        return self.id.hex()

    def limbs(self) -> list[int]:
        return _limbs(int.from_bytes(self.id, "little"), ACCOUNT_LIMBS)

    def __repr__(self) -> str:
        return f"AccountId({self.id.hex()[:12]}…)"


def encode_limbs(sender: AccountId, receiver: AccountId, amount: int, nonce: int, payload_tag: int) -> list[int]:
    """Field-element encoding of a transaction.

    Each field of the canonical serialization is packed little-endian into its own
    62-bit limbs, so accounts and amounts stay addressable inside the circuit.
    """
    return (
        sender.limbs()
        + receiver.limbs()
        + _limbs(amount, 2)
        + _limbs(nonce, 2)
        + [payload_tag]
    )


@dataclass(frozen=True)
class Transaction:
    sender: AccountId
    receiver: AccountId
    amount: int
    nonce: int
    payload_tag: int = 0
    tx_hash: Digest = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not 0 <= self.amount < 2**64:
            raise ValueError("amount must fit in 8 bytes")
        if not 0 <= self.nonce < 2**64:
            raise ValueError("nonce must fit in 8 bytes")
        if not 0 <= self.payload_tag < 2**32:
            raise ValueError("payload_tag must fit in 4 bytes")
        if self.tx_hash is None:
            object.__setattr__(self, "tx_hash", leaf_digests(np.array([self.limbs()], dtype=np.uint64))[0])

    def serialize(self) -> bytes:
        return self.sender.id + self.receiver.id + struct.pack("<QQI", self.amount, self.nonce, self.payload_tag)

    @classmethod
    def deserialize(cls, raw: bytes) -> "Transaction":
        if len(raw) != 84:
            raise ChainFormatError("transaction serialization must be 84 bytes")
        amount, nonce, tag = struct.unpack("<QQI", raw[64:])
        return cls(AccountId(raw[:32]), AccountId(raw[32:64]), amount, nonce, tag)

    def limbs(self) -> list[int]:
        return encode_limbs(self.sender, self.receiver, self.amount, self.nonce, self.payload_tag)

    def touches(self, account: AccountId) -> bool:
        return self.sender == account or self.receiver == account

    def to_json(self) -> dict:
        return {
            "sender": self.sender.hex(),
            "receiver": self.receiver.hex(),
            "amount": self.amount,
            "nonce": self.nonce,
            "payload_tag": self.payload_tag,
            "tx_hash": self.tx_hash.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict, verify: bool = True) -> "Transaction":
        stated = Digest.from_hex(obj["tx_hash"]) if "tx_hash" in obj else None
        args = (
            AccountId.from_hex(obj["sender"]),
            AccountId.from_hex(obj["receiver"]),
            int(obj["amount"]),
            int(obj["nonce"]),
            int(obj.get("payload_tag", 0)),
        )
        if verify or stated is None:
            tx = cls(*args)
            if stated is not None and stated != tx.tx_hash:
                raise ChainFormatError("tx_hash does not match transaction contents")
            return tx
        return cls(*args, tx_hash=stated)


def leaf_digests(limbs: np.ndarray) -> list[Digest]:
    """Leaf digests for an (N, 15) array of transaction limbs."""
    out = sponge_batch(np.asarray(limbs, dtype=np.uint64), TAG_TX_LEAF)
    return [Digest(tuple(int(x) for x in row)) for row in out]


@dataclass(frozen=True)
class Block:
    index: int
    transactions: tuple[Transaction, ...]
    tx_root: Digest

    @classmethod
    def assemble(cls, index: int, transactions: Sequence[Transaction]) -> "Block":
        txs = tuple(transactions)
        if not txs:
            raise InvalidParams("a block needs at least one transaction")
        hashes = [tx.tx_hash for tx in txs]
        if len(set(hashes)) != len(hashes):
            raise InvalidParams(f"duplicate transaction hash in block {index}")
        return cls(index=index, transactions=txs, tx_root=root_of(hashes))

    @cached_property
    def tree(self) -> TxTree:
        return build_tree([tx.tx_hash for tx in self.transactions])

    def open(self, position: int) -> MerklePath:
        return open_path(self.tree, position)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "tx_root": self.tx_root.hex(),
            "transactions": [tx.to_json() for tx in self.transactions],
        }

    @classmethod
    def from_json(cls, obj: dict, verify: bool = True) -> "Block":
        txs = tuple(Transaction.from_json(t, verify=verify) for t in obj["transactions"])
        stated = Digest.from_hex(obj["tx_root"])
        if verify:
            block = cls.assemble(int(obj["index"]), txs)
            if block.tx_root != stated:
                raise ChainFormatError(f"tx_root mismatch in block {obj['index']}")
            return block
        return cls(index=int(obj["index"]), transactions=txs, tx_root=stated)


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        for i, b in enumerate(self.blocks):
            if b.index != i:
                raise ChainFormatError(f"block at position {i} has index {b.index}")

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    @property
    def total_transactions(self) -> int:
        return sum(len(b.transactions) for b in self.blocks)

    @cached_property
    def accounts(self) -> frozenset[AccountId]:
        seen = set()
        for b in self.blocks:
            for tx in b.transactions:
                seen.add(tx.sender)
                seen.add(tx.receiver)
        return frozenset(seen)

    def write_jsonl(self, target: Union[str, Path, io.TextIOBase]) -> None:
        if isinstance(target, (str, Path)):
            with open(target, "w") as fh:
                self.write_jsonl(fh)
            return
        for b in self.blocks:
            target.write(json.dumps(b.to_json(), separators=(",", ":")) + "\n")

    def to_jsonl(self) -> str:
        buf = io.StringIO()
        self.write_jsonl(buf)
        return buf.getvalue()

    @classmethod
    def read_jsonl(cls, path: Union[str, Path], verify: bool = True) -> "Chain":
        with open(path) as fh:
            return cls.from_lines(fh, verify=verify)

    @classmethod
    def from_jsonl(cls, text: str, verify: bool = True) -> "Chain":
        return cls.from_lines(text.splitlines(), verify=verify)

    @classmethod
    def from_lines(cls, lines: Iterable[str], verify: bool = True) -> "Chain":
        blocks = []
        for n, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ChainFormatError(f"line {n}: {exc}") from exc
            blocks.append(Block.from_json(obj, verify=verify))
        return cls(tuple(blocks))


def generate_chain(
    seed: int,
    num_blocks: int,
    txs_per_block: int,
    relevant_per_block: Union[int, Sequence[int]],
    account: AccountId,
    num_counterparties: int = 64,
) -> Chain:
    """Synthetic chain where block ``b`` holds exactly ``relevant_per_block[b]`` txs touching ``account``
    (a single int applies to every block)."""
    if num_blocks <= 0 or txs_per_block <= 0:
        raise InvalidParams("block and transaction counts must be positive")
    if isinstance(relevant_per_block, int):
        if relevant_per_block <= 0:
            raise InvalidParams("relevant_per_block must be positive")
        counts = [relevant_per_block] * num_blocks
    else:
        counts = [int(c) for c in relevant_per_block]
        if len(counts) != num_blocks or any(c < 0 for c in counts):
            raise InvalidParams("need one non-negative relevant count per block")
    if max(counts) > txs_per_block:
        raise InvalidParams("relevant_per_block exceeds txs_per_block")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    others: list[AccountId] = []
    while len(others) < num_counterparties:
        acc = AccountId(rng.bytes(32))
        if acc != account:
            others.append(acc)
    other_limbs = np.array([a.limbs() for a in others], dtype=np.uint64)
    target_limbs = np.array(account.limbs(), dtype=np.uint64)

    n = num_blocks * txs_per_block
    senders = rng.integers(0, num_counterparties, size=n)
    receivers = rng.integers(0, num_counterparties, size=n)
    amounts = rng.integers(1, MAX_AMOUNT + 1, size=n)
    tags = rng.integers(0, 4, size=n)
    relevant = np.zeros(n, dtype=bool)
    for b in range(num_blocks):
        pos = rng.choice(txs_per_block, size=counts[b], replace=False)
        relevant[b * txs_per_block + pos] = True
    as_sender = rng.random(n) < 0.5

    limbs = np.zeros((n, NUM_LIMBS), dtype=np.uint64)
    limbs[:, 0:5] = other_limbs[senders]
    limbs[:, 5:10] = other_limbs[receivers]
    limbs[relevant & as_sender, 0:5] = target_limbs
    limbs[relevant & ~as_sender, 5:10] = target_limbs
    limbs[:, 10] = amounts.astype(np.uint64)
    nonces = np.arange(n, dtype=np.uint64)
    limbs[:, 12] = nonces
    limbs[:, 14] = tags.astype(np.uint64)
    hashes = sponge_batch(limbs, TAG_TX_LEAF)

    blocks = []
    for b in range(num_blocks):
        txs = []
        for i in range(b * txs_per_block, (b + 1) * txs_per_block):
            s = account if relevant[i] and as_sender[i] else others[senders[i]]
            r = account if relevant[i] and not as_sender[i] else others[receivers[i]]
            txs.append(
                Transaction(
                    s, r, int(amounts[i]), int(nonces[i]), int(tags[i]),
                    tx_hash=Digest(tuple(int(x) for x in hashes[i])),
                )
            )
        block_hashes = hashes[b * txs_per_block : (b + 1) * txs_per_block]
        blocks.append(Block(index=b, transactions=tuple(txs), tx_root=root_of(block_hashes)))
    return Chain(tuple(blocks))


def tx_count_for_account(chain: Chain, account: AccountId) -> int:
    return sum(1 for b in chain.blocks for tx in b.transactions if tx.touches(account))


def tx_root_of(chain: Chain, block_index: int) -> Optional[Digest]:
    if 0 <= block_index < len(chain.blocks):
        return chain.blocks[block_index].tx_root
    return None
