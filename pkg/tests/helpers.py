"""Targeted mutations of an honest (claim, witness) pair, one family per relation failure."""

from __future__ import annotations

from dataclasses import replace
from itertools import groupby

from sslc.field_merkle import Digest, MerklePath
from sslc.field_merkle.field import MODULUS
from sslc.query_engine import PartialResult, QuerySpec, finalize_pair
from sslc.statement import Reason, Witness, split_block


def blocks_of(witness: Witness):
    """[(block_index, root, [(tx, path), ...])] in witness order."""
    out = []
    for idx, group in groupby(witness.batches, key=lambda b: b.block_index):
        group = list(group)
        pairs = [(t, p) for b in group for t, p in zip(b.transactions, b.paths)]
        out.append((idx, group[0].root, pairs))
    return out


def rebatch(blocks, capacity) -> Witness:
    batches = []
    for idx, root, pairs in blocks:
        batches.extend(split_block(idx, root, pairs, capacity))
    return Witness(tuple(batches))


def positions(witness: Witness):
    """(block slot, position in block) for every witness transaction."""
    return [(bi, j) for bi, (_, _, pairs) in enumerate(blocks_of(witness)) for j in range(len(pairs))]


def _edit(witness, capacity, bi, fn):
    blocks = blocks_of(witness)
    idx, root, pairs = blocks[bi]
    blocks[bi] = (idx, root, fn(list(pairs)))
    return rebatch(blocks, capacity)


def bump(d: Digest) -> Digest:
    return Digest(((d.elements[0] + 1) % MODULUS,) + d.elements[1:])


def mutate_result(claim, witness, spec, pos, capacity):
    """Claim the fold as if the transaction at ``pos`` had amount + 1."""
    txs = witness.transactions
    total = PartialResult(sum(t.amount for t in txs) + 1, len(txs))
    num, den = finalize_pair(spec, total)
    if (num, den) == claim.result:  # COUNT ignores amounts; shift the count instead
        num += 1
    return replace(claim, result=(num, den)), witness


def mutate_count(claim, witness, spec, pos, capacity):
    """Drop the transaction at ``pos``; carries are rebuilt so only k disagrees."""
    bi, j = pos
    return claim, _edit(witness, capacity, bi, lambda ps: ps[:j] + ps[j + 1 :])


def mutate_path(claim, witness, spec, pos, capacity):
    """Flip the first real sibling on the opening at ``pos``."""
    bi, j = pos

    def fn(ps):
        tx, path = ps[j]
        sib = list(path.siblings)
        k = next(n for n, s in enumerate(sib) if s is not None)
        sib[k] = bump(sib[k])
        ps[j] = (tx, MerklePath(path.leaf_index, tuple(sib)))
        return ps

    return claim, _edit(witness, capacity, bi, fn)


def mutate_order(claim, witness, spec, pos, capacity):
    """Copy the transaction at ``pos`` over its neighbour: k is unchanged, hashes collide."""
    bi, j = pos

    def fn(ps):
        n = j + 1 if j + 1 < len(ps) else j - 1
        ps[n] = ps[j]
        return ps

    return claim, _edit(witness, capacity, bi, fn)


def mutate_predicate(chain, spec: QuerySpec):
    """Replace the transaction at ``pos`` with a non-matching one from the same block (valid opening)."""

    def mutate(claim, witness, spec_, pos, capacity):
        bi, j = pos
        idx = blocks_of(witness)[bi][0]
        block = chain.blocks[idx]
        k = next(n for n, t in enumerate(block.transactions) if not spec.matches(t))

        def fn(ps):
            ps[j] = (block.transactions[k], block.open(k))
            return ps

        return claim, _edit(witness, capacity, bi, fn)

    return mutate


def applicable(witness, pos, reason) -> bool:
    """Count and order mutations need a second transaction in the same block."""
    if reason in (Reason.COUNT_MISMATCH, Reason.ORDER_VIOLATION):
        return len(blocks_of(witness)[pos[0]][2]) >= 2
    return True


def families(chain, spec):
    return {
        Reason.RESULT_MISMATCH: mutate_result,
        Reason.COUNT_MISMATCH: mutate_count,
        Reason.BAD_PATH: mutate_path,
        Reason.ORDER_VIOLATION: mutate_order,
        Reason.PREDICATE_VIOLATION: mutate_predicate(chain, spec),
    }


# acceptance criteria outcomes, printed by the terminal summary hook
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    return bool(ok)
