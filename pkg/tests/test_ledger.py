import pytest
from hypothesis import given
from hypothesis import strategies as st

from sslc.field_merkle import build_tree, hash_elements, root_of
from sslc.field_merkle.merkle import TAG_TX_LEAF
from sslc.ledger import (
    AccountId,
    Block,
    Chain,
    ChainFormatError,
    InvalidParams,
    Transaction,
    generate_chain,
    tx_count_for_account,
    tx_root_of,
)

accounts = st.binary(min_size=32, max_size=32).map(AccountId)
u64 = st.integers(0, 2**64 - 1)
txs = st.builds(Transaction, accounts, accounts, u64, u64, st.integers(0, 2**32 - 1))


@given(txs)
def test_serialization_roundtrip(tx):
    raw = tx.serialize()
    assert len(raw) == 84
    back = Transaction.deserialize(raw)
    assert back == tx and back.tx_hash == tx.tx_hash


@given(txs)
def test_limbs_decode_back(tx):
    limbs = tx.limbs()
    assert len(limbs) == 15 and all(0 <= x < 2**62 for x in limbs)
    acct = lambda ls: sum(x << (62 * i) for i, x in enumerate(ls)).to_bytes(32, "little")
    assert acct(limbs[0:5]) == tx.sender.id
    assert acct(limbs[5:10]) == tx.receiver.id
    assert limbs[10] + (limbs[11] << 62) == tx.amount
    assert limbs[12] + (limbs[13] << 62) == tx.nonce
    assert limbs[14] == tx.payload_tag


@given(txs)
def test_tx_hash_is_leaf_sponge_of_limbs(tx):
    assert tx.tx_hash == hash_elements(tx.limbs(), TAG_TX_LEAF)


@given(txs)
def test_json_roundtrip_verifies_hash(tx):
    assert Transaction.from_json(tx.to_json()) == tx
    bad = tx.to_json() | {"amount": (tx.amount + 1) % 2**64}
    with pytest.raises(ChainFormatError):
        Transaction.from_json(bad)


def test_bad_serialization_length():
    with pytest.raises(ChainFormatError):
        Transaction.deserialize(b"\0" * 83)


def test_block_rules(alice):
    bob = AccountId.from_label("bob")
    t = Transaction(alice, bob, 5, 0)
    with pytest.raises(ValueError):
        Block.assemble(0, [])
    with pytest.raises(ValueError):
        Block.assemble(0, [t, t])
    b = Block.assemble(0, [t])
    assert b.tx_root == build_tree([t.tx_hash]).root


def test_same_seed_same_bytes(alice):
    a = generate_chain(9, 3, 16, 2, alice)
    b = generate_chain(9, 3, 16, 2, alice)
    assert a.to_jsonl() == b.to_jsonl()
    assert generate_chain(10, 3, 16, 2, alice).to_jsonl() != a.to_jsonl()


def test_zero_relevant_rejected(alice):
    with pytest.raises(InvalidParams):
        generate_chain(1, 2, 8, 0, alice)
    with pytest.raises(InvalidParams):
        generate_chain(1, 2, 8, 9, alice)


def test_per_block_counts(alice):
    c = generate_chain(2, 3, 16, [4, 0, 7], alice)
    assert [sum(t.touches(alice) for t in b.transactions) for b in c.blocks] == [4, 0, 7]


def test_large_chain_roots_recompute(alice):
    c = generate_chain(4, 64, 1024, 8, alice)
    for b in c.blocks:
        hashes = [hash_elements(t.limbs(), TAG_TX_LEAF) for t in b.transactions[:4]]
        assert hashes == [t.tx_hash for t in b.transactions[:4]]
        assert build_tree([t.tx_hash for t in b.transactions]).root == b.tx_root


def test_count_by_construction(alice):
    c = generate_chain(1, 10, 64, 7, alice)
    assert tx_count_for_account(c, alice) == 70
    scan = sum(1 for b in c.blocks for t in b.transactions if alice in (t.sender, t.receiver))
    assert scan == 70


def test_fresh_account_zero(small_chain):
    assert tx_count_for_account(small_chain, AccountId.from_label("nobody")) == 0


def test_count_survives_reserialization(small_chain, alice):
    again = Chain.from_jsonl(small_chain.to_jsonl())
    assert tx_count_for_account(again, alice) == tx_count_for_account(small_chain, alice)
    assert again == small_chain


def test_tx_root_of(small_chain):
    assert tx_root_of(small_chain, 0) == root_of([t.tx_hash for t in small_chain.blocks[0].transactions])
    assert tx_root_of(small_chain, len(small_chain)) is None
    assert tx_root_of(small_chain, 10**9) is None


def test_jsonl_file_roundtrip(tmp_path, small_chain):
    p = tmp_path / "c.jsonl"
    small_chain.write_jsonl(p)
    assert Chain.read_jsonl(p) == small_chain


def test_tampered_hash_detected(small_chain):
    first = small_chain.blocks[0].transactions[0]
    forged = small_chain.to_jsonl().replace(first.tx_hash.hex(), "0" * 64, 1)
    with pytest.raises(ChainFormatError):
        Chain.from_jsonl(forged)


def test_bad_json():
    with pytest.raises(ChainFormatError):
        Chain.from_jsonl("{not json")
