"""Commitment layer: Goldilocks field, tagged Poseidon sponge, transaction Merkle trees."""

from .field import MODULUS, FieldElement
from .merkle import (
    TAG_GENERIC,
    TAG_LEAF_ROOT,
    TAG_NODE,
    TAG_SINGLE_CHILD,
    TAG_TX_LEAF,
    Digest,
    EmptyLeafSet,
    IndexOutOfRange,
    MerklePath,
    TxTree,
    build_tree,
    fold_path,
    fold_paths_batch,
    hash_bytes,
    hash_elements,
    hash_leaf_root,
    hash_node,
    hash_single,
    open_path,
    root_of,
    verify_path,
)
from .merkle import open  # noqa: A004
from .poseidon import domain_tag, parameter_bytes, permute, permute_batch

__all__ = [
    "MODULUS",
    "TAG_GENERIC",
    "TAG_LEAF_ROOT",
    "TAG_NODE",
    "TAG_SINGLE_CHILD",
    "TAG_TX_LEAF",
    "Digest",
    "EmptyLeafSet",
    "FieldElement",
    "IndexOutOfRange",
    "MerklePath",
    "TxTree",
    "build_tree",
    "domain_tag",
    "fold_path",
    "fold_paths_batch",
    "hash_bytes",
    "hash_elements",
    "hash_leaf_root",
    "hash_node",
    "hash_single",
    "open",
    "open_path",
    "parameter_bytes",
    "permute",
    "permute_batch",
    "root_of",
    "verify_path",
]
