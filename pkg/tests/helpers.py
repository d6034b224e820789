"""Shared test helpers: a hand-driven ledger world and random generators."""

from __future__ import annotations

import random

from vtl.core import Block, Transaction, TxId, make_abstract
from vtl.crypto import SCHEMES, Keyring
from vtl.mainchain import MainChain
from vtl.validation import LocalStore


class World:
    """Minimal ledger driver: append blocks, seal abstracts, share a store."""

    def __init__(self, n: int = 3, value: int = 100, scheme: str = "stub"):
        self.n = n
        self.keyring = Keyring.generate(n, SCHEMES[scheme], b"world")
        self.log = MainChain(self.keyring)
        self.store = LocalStore()
        self.tips: dict[int, Block] = {}
        blocks = [self._append(node, [Transaction(frozenset(), node, node, 0, value)])
                  for node in range(1, n + 1)]
        self.seal(*blocks)

    def _append(self, owner: int, txs: list[Transaction]) -> Block:
        prev = self.tips.get(owner)
        b = Block(owner, (prev.height + 1) if prev else 1,
                  prev.hash if prev else None, tuple(txs))
        self.tips[owner] = b
        self.store.add_block(b)
        return b

    def add(self, owner: int, txs: list[Transaction], seal: bool = True) -> Block:
        b = self._append(owner, txs)
        if seal:
            self.seal(b)
        return b

    def seal(self, *blocks: Block) -> None:
        for b in blocks:
            assert self.log.submit_abstract(
                make_abstract(self.keyring.signer(b.owner), b))
        self.log.seal_round()

    def genesis_id(self, node: int) -> TxId:
        return TxId(node, 1, 1)


def random_txid(rng: random.Random) -> TxId:
    return TxId(rng.randint(1, 50), rng.randint(1, 1000), rng.randint(1, 20))


def random_tx(rng: random.Random) -> Transaction:
    sources = frozenset(random_txid(rng) for _ in range(rng.randint(0, 4)))
    return Transaction(sources, rng.randint(1, 50), rng.randint(1, 50),
                       rng.randint(0, 10**6), rng.randint(0, 10**6))


def random_block(rng: random.Random) -> Block:
    prev = None if rng.random() < 0.3 else rng.randbytes(32)
    txs = tuple(random_tx(rng) for _ in range(rng.randint(1, 4)))
    return Block(rng.randint(1, 50), rng.randint(1, 1000), prev, txs)
