"""Deterministic adversarial fixture corpus.

Each fixture is a JSON document holding a proof bundle, the abstract log
that anchors it, a target transaction position, and the expected verdicts
(proof verification pass/fail, validation valid/unknown).  An index file
maps fixture name to expectation so external tooling can replay the corpus.

Fixtures use the stub signature scheme with a fixed seed, so bytes are
identical across runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from vtl.core import Abstract, Block, Transaction, TxId, make_abstract
from vtl.crypto import SCHEMES, Keyring
from vtl.mainchain import MainChain
from vtl.validation import LocalStore, ProofBundle, build_proof

FIXTURE_SEED = 20240101
FIXTURE_N = 3
FIXTURE_SCHEME = "stub"


def _keyring() -> Keyring:
    return Keyring.generate(FIXTURE_N, SCHEMES[FIXTURE_SCHEME],
                            FIXTURE_SEED.to_bytes(8, "big"))


# -- JSON (de)serialization --------------------------------------------------

def _tx_to_json(tx: Transaction) -> dict:
    return {
        "sources": sorted([s.sender, s.height, s.index] for s in tx.sources),
        "sender": tx.sender,
        "receiver": tx.receiver,
        "amount": tx.amount,
        "remainder": tx.remainder,
    }


def _tx_from_json(d: dict) -> Transaction:
    return Transaction(
        frozenset(TxId(*s) for s in d["sources"]),
        d["sender"], d["receiver"], d["amount"], d["remainder"],
    )


def _block_to_json(b: Block) -> dict:
    return {
        "owner": b.owner,
        "height": b.height,
        "prev": b.prev_hash.hex() if b.prev_hash is not None else None,
        "txs": [_tx_to_json(t) for t in b.txs],
    }


def _block_from_json(d: dict) -> Block:
    prev = bytes.fromhex(d["prev"]) if d["prev"] is not None else None
    return Block(d["owner"], d["height"], prev,
                 tuple(_tx_from_json(t) for t in d["txs"]))


def _log_to_json(log: MainChain) -> list:
    return [
        [
            {"node": a.node, "height": a.height,
             "blockHash": a.block_hash.hex(), "sig": a.signature.hex()}
            for a in blk.abstracts
        ]
        for blk in log.blocks
    ]


def _log_from_json(rounds: list, keyring: Keyring) -> MainChain:
    log = MainChain(keyring)
    for abstracts in rounds:
        for a in abstracts:
            ok = log.submit_abstract(Abstract(
                a["node"], a["height"], bytes.fromhex(a["blockHash"]),
                bytes.fromhex(a["sig"])))
            if not ok:
                raise ValueError(f"fixture abstract rejected: {a}")
        log.seal_round()
    return log


# -- world construction ------------------------------------------------------

class _World:
    """Small hand-driven ledger for fixture construction."""

    def __init__(self):
        self.keyring = _keyring()
        self.log = MainChain(self.keyring)
        self.store = LocalStore()
        self.tips: dict[int, Block] = {}

    def add(self, owner: int, txs: list[Transaction], seal: bool = True) -> Block:
        prev = self.tips.get(owner)
        block = Block(owner, (prev.height + 1) if prev else 1,
                      prev.hash if prev else None, tuple(txs))
        self.tips[owner] = block
        self.store.add_block(block)
        if seal:
            self.seal(block)
        return block

    def seal(self, *blocks: Block) -> None:
        for b in blocks:
            a = make_abstract(self.keyring.signer(b.owner), b)
            if not self.log.submit_abstract(a):
                raise ValueError("abstract rejected while building fixture")
        self.log.seal_round()


def _genesis(world: _World, value: int = 100) -> dict[int, TxId]:
    ids = {}
    blocks = []
    for node in range(1, FIXTURE_N + 1):
        tx = Transaction(frozenset(), node, node, 0, value)
        blocks.append(world.add(node, [tx], seal=False))
        ids[node] = TxId(node, 1, 1)
    world.seal(*blocks)
    return ids


def _base_world() -> tuple[_World, TxId, TxId]:
    """Genesis for 3 nodes; 1 pays 2 thirty; 2 pays 3 twenty."""
    world = _World()
    g = _genesis(world)
    tx_a = Transaction(frozenset([g[1]]), 1, 2, 30, 70)
    world.add(1, [tx_a])
    a_id = TxId(1, 2, 1)
    tx_b = Transaction(frozenset([a_id]), 2, 3, 20, 10)
    world.add(2, [tx_b])
    return world, a_id, TxId(2, 2, 1)


def _bundle_json(world: _World, target: TxId,
                 replace: Optional[dict] = None) -> list[dict]:
    bundle = build_proof(target, world.store, world.log)
    blocks = []
    for coord in sorted(bundle.blocks):
        b = bundle.blocks[coord]
        if replace and coord in replace:
            b = replace[coord]
        blocks.append(_block_to_json(b))
    return blocks


def _fixture(name: str, world: _World, target: TxId, bundle: list[dict],
             expect_verify: bool, expect_validate: str) -> dict:
    return {
        "name": name,
        "scheme": FIXTURE_SCHEME,
        "seed": FIXTURE_SEED,
        "n": FIXTURE_N,
        "target": [target.sender, target.height, target.index],
        "expectVerify": expect_verify,
        "expectValidate": expect_validate,
        "bundle": bundle,
        "log": _log_to_json(world.log),
    }


def build_all() -> dict[str, dict]:
    out = {}

    # Honest proof: verifies and validates.
    world, _, b_id = _base_world()
    out["honest"] = _fixture(
        "honest", world, b_id, _bundle_json(world, b_id), True, "valid")

    # Tampered linkage: a mid-chain block's back-pointer corrupted.
    world, _, b_id = _base_world()
    victim = world.store.block(1, 2)
    forged = Block(1, 2, b"\x00" * 32, victim.txs)
    out["tampered-linkage"] = _fixture(
        "tampered-linkage", world, b_id,
        _bundle_json(world, b_id, replace={(1, 2): forged}),
        False, "unknown")

    # Duplicated target: identical transaction at two heights under one
    # anchor; the count-of-occurrences check must reject it.
    world = _World()
    g = _genesis(world)
    dup = Transaction(frozenset([g[2]]), 2, 3, 20, 80)
    world.add(2, [dup], seal=False)
    b3 = world.add(2, [dup], seal=False)
    world.seal(b3)  # only height 3 is anchored, so the walk covers both
    out["duplicated-target"] = _fixture(
        "duplicated-target", world, TxId(2, 2, 1),
        [_block_to_json(world.store.block(2, h)) for h in (1, 2, 3)],
        False, "unknown")

    # Missing confirmation: the target's block is never anchored on-chain.
    world = _World()
    g = _genesis(world)
    orphan = Transaction(frozenset([g[2]]), 2, 3, 20, 80)
    world.add(2, [orphan], seal=False)  # no abstract sealed
    out["missing-confirmation"] = _fixture(
        "missing-confirmation", world, TxId(2, 2, 1),
        [_block_to_json(world.store.block(2, h)) for h in (1, 2)],
        False, "unknown")

    # Equality violation: remainder overstates the change.
    world = _World()
    g = _genesis(world)
    inflated = Transaction(frozenset([g[2]]), 2, 3, 20, 90)  # 20+90 != 100
    world.add(2, [inflated])
    target = TxId(2, 2, 1)
    out["equality-violation"] = _fixture(
        "equality-violation", world, target, _bundle_json(world, target),
        True, "unknown")

    # Double spend: the same source spent at two heights; the later spend
    # must be rejected.
    world, a_id, b_id = _base_world()
    second = Transaction(frozenset([a_id]), 2, 1, 30, 0)
    world.add(2, [second])
    target = TxId(2, 3, 1)
    out["double-spend"] = _fixture(
        "double-spend", world, target, _bundle_json(world, target),
        True, "unknown")

    return out


def write_corpus(outdir: str) -> list[str]:
    """Write every fixture plus the index file; returns written paths."""
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    fixtures = build_all()
    paths = []
    index = {}
    for name in sorted(fixtures):
        path = root / f"{name}.json"
        path.write_text(json.dumps(fixtures[name], indent=2, sort_keys=True) + "\n")
        paths.append(str(path))
        index[name] = {
            "file": path.name,
            "expectVerify": fixtures[name]["expectVerify"],
            "expectValidate": fixtures[name]["expectValidate"],
        }
    index_path = root / "index.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    paths.append(str(index_path))
    return paths


def load_fixture(path: str):
    """Rebuild (bundle, tx, target, log, keyring, expectations) from JSON."""
    doc = json.loads(Path(path).read_text())
    keyring = Keyring.generate(doc["n"], SCHEMES[doc["scheme"]],
                               doc["seed"].to_bytes(8, "big"))
    log = _log_from_json(doc["log"], keyring)
    target = TxId(*doc["target"])
    blocks: dict[tuple[int, int], Block] = {}
    for bd in doc["bundle"]:
        b = _block_from_json(bd)
        blocks[(b.owner, b.height)] = b
    bundle = ProofBundle(target, blocks)
    tx = None
    holder = blocks.get((target.sender, target.height))
    if holder is not None and 1 <= target.index <= len(holder.txs):
        tx = holder.txs[target.index - 1]
    return bundle, tx, target, log, keyring, {
        "verify": doc["expectVerify"],
        "validate": doc["expectValidate"],
    }
