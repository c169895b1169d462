from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sslc.ledger import AccountId, Block, Chain, Transaction, generate_chain
from sslc.query_engine import (
    EmptyQuery,
    Finalize,
    PartialResult,
    Predicate,
    QueryResult,
    QuerySpec,
    count_matching,
    evaluate_native,
    map_block,
    reduce_all,
    relevant_positions,
)

BOB = AccountId.from_label("bob")
partials = st.lists(st.tuples(st.integers(0, 10**6), st.integers(1, 50)), max_size=12).map(
    lambda xs: [PartialResult(s, c) for s, c in xs]
)


def flat_scan(chain, spec):
    """Second evaluator: one flat list of matches, no per-block partials."""
    hits = [tx.amount for tx in [t for b in chain.blocks for t in b.transactions] if spec.matches(tx)]
    if spec.finalize is Finalize.AVERAGE:
        return Fraction(sum(hits), len(hits)), len(hits)
    if spec.finalize is Finalize.TOTAL:
        return Fraction(sum(hits)), len(hits)
    return Fraction(len(hits)), len(hits)


def test_spec_validation(alice):
    with pytest.raises(ValueError):
        QuerySpec(alice, Predicate.PAYLOAD_TAG)
    with pytest.raises(ValueError):
        QuerySpec(alice, Predicate.ACCOUNT_TOUCH, payload_tag=2)


def test_spec_digest_stable_and_binding(alice):
    a = QuerySpec(alice, Predicate.ACCOUNT_TOUCH, Finalize.AVERAGE)
    assert a.digest() == QuerySpec.from_json(a.to_json()).digest()
    others = [
        QuerySpec(alice, Predicate.ACCOUNT_TOUCH, Finalize.TOTAL),
        QuerySpec(alice, Predicate.ACCOUNT_TOUCH, Finalize.COUNT),
        QuerySpec(BOB, Predicate.ACCOUNT_TOUCH, Finalize.AVERAGE),
        QuerySpec(alice, Predicate.PAYLOAD_TAG, Finalize.AVERAGE, payload_tag=0),
        QuerySpec(alice, Predicate.PAYLOAD_TAG, Finalize.AVERAGE, payload_tag=1),
    ]
    assert len({a.digest()} | {o.digest() for o in others}) == 6


def test_payload_tag_needs_account_and_tag(alice):
    spec = QuerySpec(alice, Predicate.PAYLOAD_TAG, payload_tag=3)
    assert spec.matches(Transaction(alice, BOB, 1, 0, 3))
    assert spec.matches(Transaction(BOB, alice, 1, 0, 3))
    assert not spec.matches(Transaction(alice, BOB, 1, 0, 2))
    assert not spec.matches(Transaction(BOB, BOB, 1, 0, 3))


def test_map_block_empty_and_two(alice):
    carol = AccountId.from_label("carol")
    b = Block.assemble(0, [Transaction(BOB, carol, 9, 0), Transaction(alice, BOB, 5, 1), Transaction(carol, alice, 7, 2)])
    spec = QuerySpec(alice)
    total, rel = map_block(b, spec)
    assert total == PartialResult(12, 2)
    assert [t.tx_hash for t, _ in rel] == sorted(t.tx_hash for t, _ in rel)
    assert map_block(b, QuerySpec(AccountId.from_label("dave"))) == (PartialResult(0, 0), [])


def test_reduce_average_example(alice):
    r = reduce_all([PartialResult(12, 2), PartialResult(8, 2)], QuerySpec(alice))
    assert r.value == 5 and r.k == 4


@given(partials, st.randoms())
def test_reduce_order_independent(ps, rnd):
    alice = AccountId.from_label("alice")
    spec = QuerySpec(alice, finalize=Finalize.TOTAL)
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert reduce_all(ps, spec) == reduce_all(shuffled, spec)


def test_all_empty_average_raises(alice):
    with pytest.raises(EmptyQuery):
        reduce_all([PartialResult(), PartialResult()], QuerySpec(alice))


def test_single_transaction(alice):
    c = Chain((Block.assemble(0, [Transaction(alice, BOB, 3, 0)]),))
    r = evaluate_native(c, QuerySpec(alice))
    assert (r.value, r.k) == (3, 1)


def test_generated_sixteen_blocks(alice):
    c = generate_chain(seed=1, num_blocks=16, txs_per_block=256, relevant_per_block=8, account=alice)
    r = evaluate_native(c, QuerySpec(alice))
    assert r.k == 128
    assert (r.value, r.k) == flat_scan(c, QuerySpec(alice))


def test_total_vs_average(small_chain, alice):
    avg = evaluate_native(small_chain, QuerySpec(alice, finalize=Finalize.AVERAGE))
    tot = evaluate_native(small_chain, QuerySpec(alice, finalize=Finalize.TOTAL))
    assert avg.value_numerator == tot.value_numerator
    assert (avg.value_denominator, tot.value_denominator) == (avg.k, 1)


def test_per_block_counts_sum_to_total(small_chain, alice):
    spec = QuerySpec(alice)
    assert sum(map_block(b, spec)[0].count for b in small_chain.blocks) == count_matching(small_chain, spec) == 12


@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(1, 12),
       st.sampled_from(list(Finalize)), st.one_of(st.none(), st.integers(0, 3)))
def test_native_matches_flat_scan(seed, blocks, rel, fin, tag):
    alice = AccountId.from_label("alice")
    c = generate_chain(seed, blocks, 16, rel, alice)
    spec = QuerySpec(alice, Predicate.PAYLOAD_TAG if tag is not None else Predicate.ACCOUNT_TOUCH, fin, tag)
    want = flat_scan(c, spec) if (fin is not Finalize.AVERAGE or count_matching(c, spec)) else None
    if want is None:
        with pytest.raises(EmptyQuery):
            evaluate_native(c, spec)
    else:
        r = evaluate_native(c, spec)
        assert (r.value, r.k) == want


def test_relevant_positions_sorted(small_chain, alice):
    b = small_chain.blocks[0]
    pos = relevant_positions(b, QuerySpec(alice))
    hashes = [b.transactions[i].tx_hash for i in pos]
    assert hashes == sorted(hashes) and len(set(hashes)) == len(hashes)


def test_render_truncates():
    assert QueryResult(2, 3, 3).render(4) == "0.6666"
    assert QueryResult(10, 4, 4).render(0) == "2"
    assert QueryResult(7, 1, 2).render(2) == "7.00"


def test_result_json_roundtrip():
    r = QueryResult(19835506, 40, 40)
    assert QueryResult.from_json(r.to_json()) == r
