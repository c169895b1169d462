"""Digests, the tagged hash, and binary Merkle trees over transaction leaves.

Tree rules:
  * an internal node hashes its two children under the ``node`` tag;
  * a left child without a right sibling is hashed alone under ``single_child``;
  * a one-leaf tree has root ``hash(leaf)`` under ``leaf_root``, so a leaf digest is
    never itself a root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .field import MODULUS, FieldElement
from .poseidon import DIGEST_WIDTH, domain_tag, sponge_batch

TAG_GENERIC = domain_tag("generic")
TAG_TX_LEAF = domain_tag("tx_leaf")
TAG_NODE = domain_tag("node")
TAG_SINGLE_CHILD = domain_tag("single_child")
TAG_LEAF_ROOT = domain_tag("leaf_root")


class EmptyLeafSet(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True, order=True)
class Digest:
    """Four canonical field elements; ordering is lexicographic over the elements."""

    elements: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.elements) != DIGEST_WIDTH:
            raise ValueError(f"digest must have {DIGEST_WIDTH} elements")
        els = tuple(int(e) for e in self.elements)
        if any(not 0 <= e < MODULUS for e in els):
            raise ValueError("digest elements must be canonical")
        object.__setattr__(self, "elements", els)

    @classmethod
    def zero(cls) -> "Digest":
        return cls((0, 0, 0, 0))

    def hex(self) -> str:
        return "".join(f"{e:016x}" for e in self.elements)

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        if len(text) != 16 * DIGEST_WIDTH:
            raise ValueError("digest hex must be 64 characters")
        return cls(tuple(int(text[16 * i : 16 * (i + 1)], 16) for i in range(DIGEST_WIDTH)))

    def field_elements(self) -> list[FieldElement]:
        return [FieldElement(e) for e in self.elements]

    def __iter__(self):
        return iter(self.elements)

    def __repr__(self) -> str:
        return f"Digest({self.hex()[:16]}…)"


def _ints(values: Iterable) -> list[int]:
    return [int(v) for v in values]


def hash_elements(inputs: Sequence, tag: int = TAG_GENERIC) -> Digest:
    """Hash a nonempty sequence of field elements (ints or ``FieldElement``) to a digest."""
    vals = _ints(inputs)
    if not vals:
        raise ValueError("hash_elements needs at least one element")
    row = np.array([[v % MODULUS for v in vals]], dtype=np.uint64)
    return Digest(tuple(int(x) for x in sponge_batch(row, tag)[0]))


def hash_bytes(data: bytes, tag: int = TAG_GENERIC) -> Digest:
    """Digest of a byte string: byte length first, then 7-byte little-endian chunks."""
    elems = [len(data)] + [int.from_bytes(data[i : i + 7], "little") for i in range(0, len(data), 7)]
    return hash_elements(elems, tag)


def hash_node(left: Digest, right: Digest) -> Digest:
    return hash_elements(left.elements + right.elements, TAG_NODE)


def hash_single(left: Digest) -> Digest:
    return hash_elements(left.elements, TAG_SINGLE_CHILD)


def hash_leaf_root(leaf: Digest) -> Digest:
    return hash_elements(leaf.elements, TAG_LEAF_ROOT)


def _digests_to_array(ds: Sequence[Digest]) -> np.ndarray:
    return np.array([d.elements for d in ds], dtype=np.uint64).reshape(len(ds), DIGEST_WIDTH)


def _array_to_digests(arr: np.ndarray) -> list[Digest]:
    return [Digest(tuple(int(x) for x in row)) for row in arr]


def _next_level(level: np.ndarray) -> np.ndarray:
    n = level.shape[0]
    pairs = n // 2
    out = np.empty(((n + 1) // 2, DIGEST_WIDTH), dtype=np.uint64)
    if pairs:
        joined = level[: 2 * pairs].reshape(pairs, 2 * DIGEST_WIDTH)
        out[:pairs] = sponge_batch(joined, TAG_NODE)
    if n % 2:
        out[pairs] = sponge_batch(level[n - 1 : n], TAG_SINGLE_CHILD)[0]
    return out


@dataclass(frozen=True)
class TxTree:
    leaves: tuple[Digest, ...]
    levels: tuple[tuple[Digest, ...], ...] = field(repr=False)
    root: Digest

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def build_tree(leaves: Sequence[Digest]) -> TxTree:
    if len(leaves) == 0:
        raise EmptyLeafSet("cannot build a tree over zero leaves")
    level = _digests_to_array(leaves)
    arrays = [level]
    while level.shape[0] > 1:
        level = _next_level(level)
        arrays.append(level)
    levels = tuple(tuple(_array_to_digests(a)) for a in arrays)
    levels = (tuple(leaves),) + levels[1:]
    root = hash_leaf_root(leaves[0]) if len(leaves) == 1 else levels[-1][0]
    return TxTree(leaves=tuple(leaves), levels=levels, root=root)


def root_of(leaves: Sequence[Digest] | np.ndarray) -> Digest:
    """Root without materialising the intermediate levels as Digest objects."""
    level = leaves if isinstance(leaves, np.ndarray) else _digests_to_array(leaves)
    if level.shape[0] == 0:
        raise EmptyLeafSet("cannot build a tree over zero leaves")
    if level.shape[0] == 1:
        return Digest(tuple(int(x) for x in sponge_batch(level, TAG_LEAF_ROOT)[0]))
    while level.shape[0] > 1:
        level = _next_level(level)
    return Digest(tuple(int(x) for x in level[0]))


@dataclass(frozen=True)
class MerklePath:
    """Opening of one leaf. ``None`` marks a level where the node had no right sibling."""

    leaf_index: int
    siblings: tuple[Optional[Digest], ...]

    def to_json(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "siblings": [None if s is None else s.hex() for s in self.siblings],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MerklePath":
        return cls(
            leaf_index=int(obj["leaf_index"]),
            siblings=tuple(None if s is None else Digest.from_hex(s) for s in obj["siblings"]),
        )


def open_path(tree: TxTree, index: int) -> MerklePath:
    if not 0 <= index < tree.leaf_count:
        raise IndexOutOfRange(f"leaf {index} outside tree of {tree.leaf_count} leaves")
    siblings: list[Optional[Digest]] = []
    i = index
    for level in tree.levels[:-1]:
        j = i ^ 1
        siblings.append(level[j] if j < len(level) else None)
        i >>= 1
    return MerklePath(leaf_index=index, siblings=tuple(siblings))


# ``open`` is the public name; ``open_path`` avoids shadowing the builtin inside this module.
open = open_path  # noqa: A001


def fold_path(leaf: Digest, path: MerklePath) -> Optional[Digest]:
    """Root implied by ``path``; None when the path is structurally invalid."""
    if not path.siblings:
        return None if path.leaf_index != 0 else hash_leaf_root(leaf)
    idx = path.leaf_index
    if idx < 0:
        return None
    cur = leaf
    for sib in path.siblings:
        bit = idx & 1
        if sib is None:
            if bit:
                return None
            cur = hash_single(cur)
        else:
            cur = hash_node(sib, cur) if bit else hash_node(cur, sib)
        idx >>= 1
    if idx != 0:
        return None
    return cur


def verify_path(root: Digest, leaf: Digest, path: MerklePath) -> bool:
    return fold_path(leaf, path) == root


def fold_paths_batch(leaves: Sequence[Digest], paths: Sequence[MerklePath]) -> list[Optional[Digest]]:
    """Vectorised ``fold_path`` over many openings."""
    n = len(leaves)
    if n != len(paths):
        raise ValueError("leaves and paths differ in length")
    if n == 0:
        return []
    cur = _digests_to_array(leaves)
    valid = np.ones(n, dtype=bool)
    idx = np.array([p.leaf_index for p in paths], dtype=np.int64)
    valid &= idx >= 0
    idx = np.where(valid, idx, 0)
    lengths = np.array([len(p.siblings) for p in paths], dtype=np.int64)
    depth = int(lengths.max())

    lone = lengths == 0
    if lone.any():
        rows = np.nonzero(lone)[0]
        cur[rows] = sponge_batch(cur[rows], TAG_LEAF_ROOT)
        valid[rows] &= idx[rows] == 0

    for level in range(depth):
        active = lengths > level
        if not active.any():
            break
        bits = (idx >> level) & 1
        sib = np.zeros((n, DIGEST_WIDTH), dtype=np.uint64)
        missing = np.zeros(n, dtype=bool)
        for r in np.nonzero(active)[0]:
            s = paths[r].siblings[level]
            if s is None:
                missing[r] = True
            else:
                sib[r] = s.elements
        valid &= ~(missing & (bits == 1))
        single_rows = np.nonzero(active & missing)[0]
        pair_rows = np.nonzero(active & ~missing)[0]
        if single_rows.size:
            cur[single_rows] = sponge_batch(cur[single_rows], TAG_SINGLE_CHILD)
        if pair_rows.size:
            b = bits[pair_rows][:, None].astype(bool)
            left = np.where(b, sib[pair_rows], cur[pair_rows])
            right = np.where(b, cur[pair_rows], sib[pair_rows])
            cur[pair_rows] = sponge_batch(np.hstack([left, right]), TAG_NODE)
    valid &= (idx >> lengths) == 0
    out: list[Optional[Digest]] = []
    for r in range(n):
        out.append(Digest(tuple(int(x) for x in cur[r])) if valid[r] else None)
    return out


__all__ = [
    "Digest",
    "EmptyLeafSet",
    "IndexOutOfRange",
    "MerklePath",
    "TxTree",
    "build_tree",
    "fold_path",
    "fold_paths_batch",
    "hash_bytes",
    "hash_elements",
    "hash_leaf_root",
    "hash_node",
    "hash_single",
    "open",
    "open_path",
    "root_of",
    "verify_path",
]
