"""Proof construction, proof verification (adversarial), validation."""

import pytest

from helpers import World

from vtl.core import Block, Transaction, TxId
from vtl.validation import (
    IncompleteStoreError,
    LocalStore,
    ProofBundle,
    UnconfirmedError,
    build_proof,
    decode_proof_bundle,
    validate,
    validate_in_store,
    verify_proof,
)


def _naive_proof_coords(target: TxId, store: LocalStore, log) -> set:
    """Independent recursive set-union walker per the proof definition:
    sender chain prefix to the minimal confirmed height, plus source proofs."""
    tx = store.tx_at(target)
    assert tx is not None
    k_prime = log.first_height_at_or_after(target.sender, target.height)
    assert k_prime is not None
    coords = {(target.sender, h) for h in range(1, k_prime + 1)}
    for src in tx.sources:
        coords |= _naive_proof_coords(src, store, log)
    return coords


def _pay(world: World, sender: int, receiver: int, source: TxId,
         amount: int, remainder: int, seal: bool = True) -> TxId:
    block = world.add(
        sender,
        [Transaction(frozenset([source]), sender, receiver, amount, remainder)],
        seal=seal)
    return TxId(sender, block.height, 1)


class TestBuildProof:
    def test_genesis_proof_is_single_block(self, world):
        bundle = build_proof(world.genesis_id(1), world.store, world.log)
        assert set(bundle.blocks) == {(1, 1)}

    def test_minimal_k_prime(self, world):
        t = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        bundle = build_proof(t, world.store, world.log)
        assert set(bundle.blocks) == {(1, 1), (1, 2)}

    def test_payment_cycle_covers_all_chains(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t2 = _pay(world, 2, 3, t1, 20, 10)
        t3 = _pay(world, 3, 1, t2, 5, 15)
        bundle = build_proof(t3, world.store, world.log)
        assert bundle.chain_owners() == {1, 2, 3}
        # Cross-check the whole block set against the naive recursive walker.
        assert set(bundle.blocks) == _naive_proof_coords(
            t3, world.store, world.log)

    def test_missing_block_names_coordinate(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t2 = _pay(world, 2, 3, t1, 20, 10)
        partial = LocalStore()
        for coord, b in world.store.blocks.items():
            if coord != (1, 1):
                partial.add_block(b)
        with pytest.raises(IncompleteStoreError) as err:
            build_proof(t2, partial, world.log)
        assert (err.value.owner, err.value.height) == (1, 1)

    def test_unconfirmed_target(self, world):
        t = _pay(world, 1, 2, world.genesis_id(1), 30, 70, seal=False)
        with pytest.raises(UnconfirmedError):
            build_proof(t, world.store, world.log)


class TestVerifyProof:
    def _honest(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t2 = _pay(world, 2, 3, t1, 20, 10)
        bundle = build_proof(t2, world.store, world.log)
        return t2, world.store.tx_at(t2), bundle

    def test_honest_pass(self, world):
        _, tx, bundle = self._honest(world)
        assert verify_proof(bundle, tx, world.log, world.keyring)

    def test_dropped_interior_block_fails(self, world):
        t2, tx, bundle = self._honest(world)
        blocks = dict(bundle.blocks)
        del blocks[(1, 1)]
        res = verify_proof(ProofBundle(t2, blocks), tx, world.log, world.keyring)
        assert not res and "missing" in res.reason

    def test_tampered_linkage_fails(self, world):
        t2, tx, bundle = self._honest(world)
        blocks = dict(bundle.blocks)
        victim = blocks[(1, 2)]
        blocks[(1, 2)] = Block(1, 2, b"\xff" * 32, victim.txs)
        res = verify_proof(ProofBundle(t2, blocks), tx, world.log, world.keyring)
        assert not res

    def test_duplicated_target_fails(self, world):
        dup = Transaction(frozenset([world.genesis_id(2)]), 2, 3, 20, 80)
        world.add(2, [dup], seal=False)
        b3 = world.add(2, [dup], seal=False)
        world.seal(b3)
        target = TxId(2, 2, 1)
        blocks = {(2, h): world.store.block(2, h) for h in (1, 2, 3)}
        res = verify_proof(ProofBundle(target, blocks), dup,
                           world.log, world.keyring)
        assert not res and "once" in res.reason

    def test_block_conflicting_with_abstract_fails(self, world):
        t2, tx, bundle = self._honest(world)
        blocks = dict(bundle.blocks)
        g1 = blocks[(1, 1)]
        forged_g1 = Block(1, 1, None,
                          (Transaction(frozenset(), 1, 1, 0, 999),))
        blocks[(1, 1)] = forged_g1
        blocks[(1, 2)] = Block(1, 2, forged_g1.hash, blocks[(1, 2)].txs)
        res = verify_proof(ProofBundle(t2, blocks), tx, world.log, world.keyring)
        assert not res
        del g1

    def test_transaction_position_mismatch_fails(self, world):
        t2, tx, bundle = self._honest(world)
        wrong = Transaction(tx.sources, tx.sender, tx.receiver,
                            tx.amount + 1, tx.remainder)
        res = verify_proof(bundle, wrong, world.log, world.keyring)
        assert not res


class TestValidate:
    def test_genesis_valid(self, world):
        t = world.genesis_id(1)
        bundle = build_proof(t, world.store, world.log)
        assert validate(world.store.tx_at(t), t, bundle,
                        world.log, world.keyring) == "valid"

    def test_honest_chain_valid(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t2 = _pay(world, 2, 3, t1, 20, 10)
        assert validate_in_store(t2, world.store, world.log,
                                 world.keyring) == "valid"

    def test_equality_violation_unknown(self, world):
        t = _pay(world, 1, 2, world.genesis_id(1), 30, 80)  # 30+80 != 100
        assert validate_in_store(t, world.store, world.log,
                                 world.keyring) == "unknown"

    def test_double_spend_unknown(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t_second = _pay(world, 1, 3, world.genesis_id(1), 30, 70)
        assert validate_in_store(t1, world.store, world.log,
                                 world.keyring) == "valid"
        assert validate_in_store(t_second, world.store, world.log,
                                 world.keyring) == "unknown"

    def test_theft_unknown(self, world):
        # Node 3 tries to spend node 1's genesis: entitlement is zero, so
        # the equality check can never balance.
        t = _pay(world, 3, 2, world.genesis_id(1), 30, 70)
        assert validate_in_store(t, world.store, world.log,
                                 world.keyring) == "unknown"

    def test_invalid_source_propagates(self, world):
        bad = _pay(world, 1, 2, world.genesis_id(1), 30, 80)  # equality broken
        downstream = _pay(world, 2, 3, bad, 10, 20)
        assert validate_in_store(downstream, world.store, world.log,
                                 world.keyring) == "unknown"

    def test_receiver_and_sender_shares(self, world):
        # Receiver redeems the amount; sender separately redeems the change.
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        spend_amount = _pay(world, 2, 3, t1, 30, 0)
        spend_change = _pay(world, 1, 3, t1, 70, 0)
        assert validate_in_store(spend_amount, world.store, world.log,
                                 world.keyring) == "valid"
        assert validate_in_store(spend_change, world.store, world.log,
                                 world.keyring) == "valid"

    def test_monotone_in_store_growth(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        small = LocalStore()
        for h in (1, 2):
            small.add_block(world.store.block(1, h))
        assert validate_in_store(t1, small, world.log,
                                 world.keyring) == "valid"
        # Growing the store never flips a valid verdict.
        _pay(world, 2, 3, t1, 20, 10)
        for b in world.store.blocks.values():
            small.add_block(b)
        assert validate_in_store(t1, small, world.log,
                                 world.keyring) == "valid"
        assert t1 in small.validated

    def test_two_honest_stores_agree(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        t2 = _pay(world, 2, 3, t1, 20, 10)
        other = LocalStore.from_blocks(list(world.store.blocks.values()))
        for target in (t1, t2):
            assert (validate_in_store(target, world.store, world.log, world.keyring)
                    == validate_in_store(target, other, world.log, world.keyring))

    def test_unknown_position(self, world):
        assert validate_in_store(TxId(1, 9, 1), world.store, world.log,
                                 world.keyring) == "unknown"


class TestBundleCodec:
    def test_roundtrip(self, world):
        t1 = _pay(world, 1, 2, world.genesis_id(1), 30, 70)
        bundle = build_proof(t1, world.store, world.log)
        data = bundle.encode()
        back = decode_proof_bundle(data)
        assert back.target == t1
        assert dict(back.blocks) == dict(bundle.blocks)
        assert back.encode() == data

    def test_truncation_rejected(self, world):
        from vtl.core import DecodeError
        bundle = build_proof(world.genesis_id(1), world.store, world.log)
        with pytest.raises(DecodeError):
            decode_proof_bundle(bundle.encode()[:-3])
