"""Canonical encoding, hashing, abstracts, and individual chains."""

import random

import pytest

from helpers import random_block, random_tx, random_txid

from vtl.core import (
    Block,
    DecodeError,
    IndividualChain,
    LedgerError,
    Transaction,
    TxId,
    block_hash,
    canonical_encode,
    decode_block,
    decode_transaction,
    genesis_block,
    make_abstract,
    verify_abstract,
)

GOLDEN_GENESIS = "3605fb27a44345d26e539753d9ee0d2333966165d139a5fa0ed7a5e14acf4b67"
GOLDEN_BLOCK = "e0480ab57d893403ddd3e291a1fcc910e36f149de7d80ae466f1b994d910c383"


def _fixture_block() -> Block:
    g = genesis_block(3, 100)
    tx = Transaction(frozenset({TxId(1, 1, 1), TxId(2, 3, 2)}), 1, 4, 25, 75)
    return Block(1, 2, g.hash, (tx,))


class TestCanonicalEncoding:
    def test_deterministic(self):
        rng = random.Random(1)
        for _ in range(100):
            tx = random_tx(rng)
            assert tx.encode() == tx.encode()
            assert canonical_encode(tx) == tx.encode()

    def test_field_injectivity(self):
        tx = Transaction(frozenset({TxId(1, 1, 1)}), 1, 2, 10, 20)
        other = Transaction(frozenset({TxId(1, 1, 1)}), 1, 2, 10, 21)
        assert tx.encode() != other.encode()

    def test_source_order_irrelevant(self):
        a, b = TxId(2, 1, 1), TxId(1, 5, 2)
        tx1 = Transaction(frozenset([a, b]), 1, 2, 1, 2)
        tx2 = Transaction(frozenset([b, a]), 1, 2, 1, 2)
        assert tx1.encode() == tx2.encode()

    def test_injectivity_corpus(self):
        # >= 10^4 distinct values must produce distinct encodings.
        rng = random.Random(42)
        seen: dict[bytes, object] = {}
        values: set = set()
        while len(values) < 10_000:
            v = random_tx(rng) if rng.random() < 0.6 else random_block(rng)
            values.add(v)
        for v in values:
            enc = v.encode()
            assert enc not in seen or seen[enc] == v, "encoding collision"
            seen[enc] = v
        assert len(seen) == len(values)

    def test_golden_digests(self):
        assert genesis_block(3, 100).hash.hex() == GOLDEN_GENESIS
        assert _fixture_block().hash.hex() == GOLDEN_BLOCK

    def test_encode_rejects_unknown_type(self):
        with pytest.raises(TypeError):
            canonical_encode(object())


class TestDecode:
    def test_roundtrip(self):
        rng = random.Random(7)
        for _ in range(200):
            tx = random_tx(rng)
            assert decode_transaction(tx.encode()) == tx
            b = random_block(rng)
            assert decode_block(b.encode()) == b

    def test_truncated(self):
        raw = _fixture_block().encode()
        with pytest.raises(DecodeError):
            decode_block(raw[:-1])

    def test_trailing_bytes(self):
        raw = _fixture_block().encode()
        with pytest.raises(DecodeError):
            decode_block(raw + b"\x00")

    def test_wrong_tag(self):
        tx = Transaction(frozenset(), 1, 1, 0, 5)
        with pytest.raises(DecodeError):
            decode_block(tx.encode())


class TestBlockHash:
    def test_identical_blocks_identical_hash(self):
        assert _fixture_block().hash == _fixture_block().hash
        assert block_hash(_fixture_block()) == _fixture_block().hash

    def test_amount_flip_changes_hash(self):
        b = _fixture_block()
        tx = b.txs[0]
        mutated = Block(b.owner, b.height, b.prev_hash, (Transaction(
            tx.sources, tx.sender, tx.receiver, tx.amount + 1, tx.remainder),))
        assert mutated.hash != b.hash


class TestAbstracts:
    def test_roundtrip(self, stub_ring):
        b = genesis_block(2, 50)
        a = make_abstract(stub_ring.signer(2), b)
        assert a.node == 2 and a.height == 1 and a.block_hash == b.hash
        assert verify_abstract(a, stub_ring.public(2), stub_ring.scheme)

    def test_wrong_key_fails(self, stub_ring):
        a = make_abstract(stub_ring.signer(2), genesis_block(2, 50))
        assert not verify_abstract(a, stub_ring.public(3), stub_ring.scheme)

    def test_owner_mismatch_rejected(self, stub_ring):
        with pytest.raises(LedgerError):
            make_abstract(stub_ring.signer(1), genesis_block(2, 50))

    def test_single_byte_mutation_sweep(self, stub_ring):
        # Flipping any byte of the signed payload must break verification.
        b = genesis_block(2, 50)
        a = make_abstract(stub_ring.signer(2), b)
        payload = a.payload()
        for i in range(len(payload)):
            mutated = bytearray(payload)
            mutated[i] ^= 0x01
            assert not stub_ring.scheme.verify(
                stub_ring.public(2), bytes(mutated), a.signature), i

    def test_ed25519_scheme(self):
        from vtl.crypto import SCHEMES, Keyring
        ring = Keyring.generate(2, SCHEMES["ed25519"], b"x")
        b = genesis_block(1, 10)
        a = make_abstract(ring.signer(1), b)
        assert verify_abstract(a, ring.public(1), ring.scheme)
        assert not verify_abstract(a, ring.public(2), ring.scheme)


class TestGenesis:
    def test_contents(self):
        b = genesis_block(3, 100)
        assert b.height == 1 and b.prev_hash is None and b.owner == 3
        (tx,) = b.txs
        assert tx == Transaction(frozenset(), 3, 3, 0, 100)
        assert tx.is_genesis

    def test_rejects_nonpositive_value(self):
        with pytest.raises(LedgerError):
            genesis_block(1, 0)

    def test_only_genesis_has_empty_sources(self):
        assert not Transaction(frozenset(), 1, 2, 5, 0).is_genesis
        assert not Transaction(frozenset({TxId(1, 1, 1)}), 1, 1, 5, 0).is_genesis


class TestIndividualChain:
    def test_append_links(self):
        chain = IndividualChain(genesis_block(1, 100))
        b2 = chain.append_block(
            [Transaction(frozenset({TxId(1, 1, 1)}), 1, 2, 30, 70)])
        assert b2.height == 2
        assert b2.prev_hash == chain.blocks[0].hash
        chain.append_block(
            [Transaction(frozenset({TxId(1, 2, 1)}), 1, 2, 10, 60)])
        assert chain.verify_linkage()

    def test_foreign_sender_rejected(self):
        chain = IndividualChain(genesis_block(1, 100))
        with pytest.raises(LedgerError):
            chain.append_block([Transaction(frozenset(), 2, 3, 5, 0)])

    def test_empty_block_rejected(self):
        chain = IndividualChain(genesis_block(1, 100))
        with pytest.raises(LedgerError):
            chain.append_block([])

    def test_must_start_at_height_one(self):
        b = genesis_block(1, 100)
        with pytest.raises(LedgerError):
            IndividualChain(Block(1, 2, b.hash, b.txs))


class TestTxId:
    def test_lexicographic_order(self):
        assert TxId(1, 2, 3) < TxId(1, 2, 4) < TxId(1, 3, 1) < TxId(2, 1, 1)

    def test_block_txids_one_based(self):
        b = _fixture_block()
        [(txid, tx)] = list(b.txids())
        assert txid == TxId(1, 2, 1) and tx is b.txs[0]
