"""Validity proofs, proof verification, and the validation function.

A validity proof for a transaction is the sender's chain prefix up to a
confirmed height plus, recursively, the proofs of every source.  Proof
verification walks those chains checking hash linkage, on-chain abstract
compliance, confirmation, and uniqueness of the target.  The validation
function layers the value checks on top: equality, double-spending within
the sender's chain, and recursive source validity.

Equality uses entitlement semantics: a source contributes its `amount` to
its receiver and its `remainder` to its sender (the spender's change).  A
genesis transaction, where sender == receiver, contributes its full value.
This is the only reading under which value is conserved and a third party
cannot spend someone else's output.

All checks are pure over immutable blocks and an append-only log, so a
`LocalStore` may cache verified chain prefixes, checked abstracts, and
valid verdicts; the cached and uncached paths compute the same predicate.
"""

from __future__ import annotations

import bisect
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator, Optional

from vtl.core import (
    Block,
    DecodeError,
    LedgerError,
    NodeId,
    Transaction,
    TxId,
    decode_block,
)
from vtl.crypto import Keyring
from vtl.mainchain import MainChain

Coord = tuple[NodeId, int]


class ProofError(LedgerError):
    """Base for proof construction failures."""


class IncompleteStoreError(ProofError):
    def __init__(self, owner: NodeId, height: int):
        super().__init__(f"store is missing block ({owner}, {height})")
        self.owner = owner
        self.height = height


class UnconfirmedError(ProofError):
    def __init__(self, txid: TxId):
        super().__init__(f"no confirming abstract on chain for {txid}")
        self.txid = txid


def entitlement(source_tx: Transaction, spender: NodeId) -> int:
    """Value `spender` may draw from `source_tx`.

    Receiver draws the amount, sender draws the remainder, a genesis owner
    (sender == receiver) draws the full value, anyone else draws nothing.
    """
    if source_tx.sender == source_tx.receiver:
        if spender == source_tx.sender:
            return source_tx.amount + source_tx.remainder
        return 0
    if spender == source_tx.receiver:
        return source_tx.amount
    if spender == source_tx.sender:
        return source_tx.remainder
    return 0


class LocalStore:
    """All blocks a node has acquired, with incremental validation caches.

    Blocks are first-wins per (owner, height): once stored, a coordinate is
    never overwritten, which keeps the chain-verification caches sound.
    """

    def __init__(self) -> None:
        self.blocks: dict[Coord, Block] = {}
        self.validated: set[TxId] = set()
        # Transactions whose proof verification already passed in this store.
        self.verify_passed: set[TxId] = set()
        # Position index: TxId -> Transaction.
        self._tx_at: dict[TxId, Transaction] = {}
        # Per owner: transaction tuple -> sorted heights it occurs at.
        self._occurrences: dict[NodeId, dict[Transaction, list[int]]] = {}
        # Per owner: source TxId -> spender TxIds within that owner's chain.
        self._spenders: dict[NodeId, dict[TxId, list[TxId]]] = {}
        # Chain verification caches (sound because coordinates are immutable).
        self._linkage_upto: dict[NodeId, int] = {}
        self._abstracts_ok: dict[NodeId, set[int]] = {}
        # Proof frontier cache: TxId -> {owner: confirmed height}.
        self._frontier: dict[TxId, dict[NodeId, int]] = {}

    @classmethod
    def from_blocks(cls, blocks) -> "LocalStore":
        store = cls()
        if isinstance(blocks, Mapping):
            blocks = blocks.values()
        for b in blocks:
            store.add_block(b)
        return store

    def add_block(self, b: Block) -> bool:
        """Insert a block; returns False if the coordinate was already held."""
        key = (b.owner, b.height)
        if key in self.blocks:
            return False
        self.blocks[key] = b
        occ = self._occurrences.setdefault(b.owner, {})
        spend = self._spenders.setdefault(b.owner, {})
        for txid, tx in b.txids():
            self._tx_at[txid] = tx
            bisect.insort(occ.setdefault(tx, []), b.height)
            for src in tx.sources:
                spend.setdefault(src, []).append(txid)
        return True

    def has(self, owner: NodeId, height: int) -> bool:
        return (owner, height) in self.blocks

    def block(self, owner: NodeId, height: int) -> Optional[Block]:
        return self.blocks.get((owner, height))

    def tx_at(self, txid: TxId) -> Optional[Transaction]:
        return self._tx_at.get(txid)

    def coords(self) -> set[Coord]:
        return set(self.blocks.keys())

    def chain_owners(self) -> set[NodeId]:
        return {owner for owner, _ in self.blocks}

    def count_occurrences(self, owner: NodeId, tx: Transaction, upto: int) -> int:
        heights = self._occurrences.get(owner, {}).get(tx)
        if not heights:
            return 0
        return bisect.bisect_right(heights, upto)

    def spenders_of(self, owner: NodeId, source: TxId) -> list[TxId]:
        return self._spenders.get(owner, {}).get(source, [])

    # -- proof frontiers -------------------------------------------------

    def proof_frontier(self, target: TxId, log: MainChain) -> dict[NodeId, int]:
        """Chains and heights a validity proof of `target` must cover.

        The target's own chain is covered up to the smallest confirmed height
        at or after the target; source chains recursively likewise.  Raises
        IncompleteStoreError / UnconfirmedError when the proof cannot exist
        from this store.
        """
        cached = self._frontier.get(target)
        if cached is not None:
            return cached
        frontier: dict[NodeId, int] = {}
        self._frontier_walk(target, log, frontier, set())
        self._frontier[target] = frontier
        return frontier

    def _frontier_walk(self, txid: TxId, log: MainChain,
                       frontier: dict[NodeId, int], visiting: set[TxId]) -> None:
        if txid in visiting:
            raise ProofError(f"cyclic source references at {txid}")
        cached = self._frontier.get(txid)
        if cached is not None:
            for owner, h in cached.items():
                if frontier.get(owner, 0) < h:
                    frontier[owner] = h
            return
        tx = self._tx_at.get(txid)
        if tx is None:
            raise IncompleteStoreError(txid.sender, txid.height)
        k_prime = log.first_height_at_or_after(txid.sender, txid.height)
        if k_prime is None:
            raise UnconfirmedError(txid)
        for h in range(1, k_prime + 1):
            if (txid.sender, h) not in self.blocks:
                raise IncompleteStoreError(txid.sender, h)
        sub: dict[NodeId, int] = {txid.sender: k_prime}
        visiting.add(txid)
        try:
            for src in sorted(tx.sources):
                self._frontier_walk(src, log, sub, visiting)
        finally:
            visiting.discard(txid)
        self._frontier[txid] = sub
        for owner, h in sub.items():
            if frontier.get(owner, 0) < h:
                frontier[owner] = h

    def closure_chains(self, target: TxId, log: MainChain) -> frozenset[NodeId]:
        """Chain owners appearing in the proof of `target`."""
        return frozenset(self.proof_frontier(target, log))


class _FrontierView(Mapping):
    """Read-only bundle view over a store, limited to a proof frontier."""

    def __init__(self, store: LocalStore, frontier: dict[NodeId, int]):
        self._store = store
        self._frontier = frontier

    def __getitem__(self, key: Coord) -> Block:
        owner, height = key
        if not 1 <= height <= self._frontier.get(owner, 0):
            raise KeyError(key)
        b = self._store.block(owner, height)
        if b is None:
            raise KeyError(key)
        return b

    def __iter__(self) -> Iterator[Coord]:
        for owner, upto in sorted(self._frontier.items()):
            for h in range(1, upto + 1):
                if self._store.has(owner, h):
                    yield (owner, h)

    def __len__(self) -> int:
        return sum(1 for _ in self)


@dataclass(frozen=True)
class ProofBundle:
    """A validity proof: the target position and the covering blocks."""

    target: TxId
    blocks: Mapping  # (owner, height) -> Block

    def chain_owners(self) -> set[NodeId]:
        return {owner for owner, _ in self.blocks}

    def block_count(self) -> int:
        return len(self.blocks)

    def encode(self) -> bytes:
        """Canonical bundle bytes: target, then length-prefixed block
        encodings sorted by (owner, height)."""
        parts = [self.target.encode(), struct.pack(">I", len(self.blocks))]
        for coord in sorted(self.blocks):
            raw = self.blocks[coord].encode()
            parts.append(struct.pack(">I", len(raw)))
            parts.append(raw)
        return b"".join(parts)


def decode_proof_bundle(data: bytes) -> ProofBundle:
    """Inverse of ProofBundle.encode."""
    if len(data) < 28:
        raise DecodeError("truncated bundle")
    target = TxId(*struct.unpack(">QQQ", data[:24]))
    (count,) = struct.unpack(">I", data[24:28])
    offset = 28
    blocks: dict[Coord, Block] = {}
    for _ in range(count):
        if offset + 4 > len(data):
            raise DecodeError("truncated bundle block header")
        (size,) = struct.unpack(">I", data[offset:offset + 4])
        offset += 4
        b = decode_block(data[offset:offset + size])
        offset += size
        blocks[(b.owner, b.height)] = b
    if offset != len(data):
        raise DecodeError("trailing bytes after bundle")
    return ProofBundle(target, blocks)


def build_proof(target: TxId, store: LocalStore, log: MainChain) -> ProofBundle:
    """Assemble the minimal validity proof of `target` from `store`.

    The covering height for each chain is the smallest confirmed height that
    works.  Raises IncompleteStoreError or UnconfirmedError when impossible.
    """
    frontier = store.proof_frontier(target, log)
    return ProofBundle(target, _FrontierView(store, frontier))


@dataclass
class VerifyResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _fail(reason: str) -> VerifyResult:
    return VerifyResult(False, reason)


class _ChainChecker:
    """Walks chain prefixes checking presence, linkage, and on-chain
    abstract compliance.  Optionally backed by a store's persistent caches."""

    def __init__(self, store: LocalStore, log: MainChain, keyring: Keyring,
                 use_cache: bool):
        self.store = store
        self.log = log
        self.keyring = keyring
        if use_cache:
            self.linkage_upto = store._linkage_upto
            self.abstracts_ok = store._abstracts_ok
        else:
            self.linkage_upto = {}
            self.abstracts_ok = {}

    def check(self, owner: NodeId, upto: int) -> VerifyResult:
        # Presence + hash linkage.
        start = self.linkage_upto.get(owner, 0)
        if start < upto:
            prev = self.store.block(owner, start) if start else None
            for h in range(start + 1, upto + 1):
                b = self.store.block(owner, h)
                if b is None:
                    return _fail(f"missing block ({owner}, {h})")
                if b.owner != owner:
                    return _fail(f"block at ({owner}, {h}) has wrong owner")
                if h == 1:
                    if b.prev_hash is not None:
                        return _fail(f"genesis block of {owner} has a prev hash")
                else:
                    if prev is None:
                        prev = self.store.block(owner, h - 1)
                    if prev is None or b.prev_hash != prev.hash:
                        return _fail(f"hash linkage broken at ({owner}, {h})")
                prev = b
                self.linkage_upto[owner] = h
        # On-chain abstracts covering the prefix must match and be signed.
        checked = self.abstracts_ok.setdefault(owner, set())
        for h in self.log.heights_of(owner):
            if h > upto:
                break
            if h in checked:
                continue
            a = self.log.abstract_at(owner, h)
            b = self.store.block(owner, h)
            if b is None or a.block_hash != b.hash:
                return _fail(f"on-chain abstract mismatch at ({owner}, {h})")
            if not self.keyring.scheme.verify(
                self.keyring.public(owner), a.payload(), a.signature
            ):
                return _fail(f"bad abstract signature at ({owner}, {h})")
            checked.add(h)
        return VerifyResult(True)


def _bundle_bounds(store: LocalStore) -> dict[NodeId, int]:
    bounds: dict[NodeId, int] = {}
    for owner, height in store.blocks:
        if bounds.get(owner, 0) < height:
            bounds[owner] = height
    return bounds


def _verify(store: LocalStore, bounds: Optional[dict[NodeId, int]], target: TxId,
            tx: Transaction, log: MainChain, keyring: Keyring,
            checker: _ChainChecker, passed: set[TxId],
            visiting: set[TxId]) -> VerifyResult:
    """Proof verification for one transaction and, recursively, its sources.

    With explicit `bounds` (a standalone bundle) each chain is walked to the
    bundle's full extent.  Without bounds (store-backed) each transaction is
    checked against its own minimal confirming height; that bound is stable
    over an append-only log, which is what makes `passed` safely persistent.
    """
    if target in passed:
        return VerifyResult(True)
    if target in visiting:
        return _fail(f"cyclic source references at {target}")
    if tx.sender != target.sender:
        return _fail(f"transaction sender {tx.sender} does not match {target}")
    # Confirmation: an on-chain abstract at or after the target's height.
    k_prime = log.first_height_at_or_after(target.sender, target.height)
    if k_prime is None:
        return _fail(f"no confirming abstract covers {target}")
    if bounds is not None:
        upto = bounds.get(target.sender, 0)
        if upto < target.height:
            return _fail(
                f"proof does not cover block ({target.sender}, {target.height})")
        if k_prime > upto:
            return _fail(f"no confirming abstract covers {target}")
    else:
        upto = k_prime
    res = checker.check(target.sender, upto)
    if not res:
        return res
    # The claimed position must hold the transaction...
    b = store.block(target.sender, target.height)
    if not 1 <= target.index <= len(b.txs) or b.txs[target.index - 1] != tx:
        return _fail(f"transaction not found at {target}")
    # ... and hold it exactly once across the covered prefix.
    if store.count_occurrences(target.sender, tx, upto) != 1:
        return _fail(f"transaction at {target} occurs more than once")
    visiting.add(target)
    try:
        for src in sorted(tx.sources):
            if bounds is not None and src.height > bounds.get(src.sender, 0):
                return _fail(f"proof does not cover source {src}")
            src_tx = store.tx_at(src)
            if src_tx is None:
                return _fail(f"source {src} not present in proof")
            res = _verify(store, bounds, src, src_tx, log, keyring, checker,
                          passed, visiting)
            if not res:
                return res
    finally:
        visiting.discard(target)
    passed.add(target)
    return VerifyResult(True)


def verify_proof(p: ProofBundle, tx: Transaction, log: MainChain,
                 keyring: Keyring) -> VerifyResult:
    """Check a (possibly adversarial) bundle as a validity proof of `tx` at
    `p.target`: chain integrity, abstract compliance, confirmation, and
    uniqueness, recursively for all source chains."""
    store = p.blocks._store if isinstance(p.blocks, _FrontierView) \
        else LocalStore.from_blocks(p.blocks)
    if isinstance(p.blocks, _FrontierView):
        bounds = dict(p.blocks._frontier)
    else:
        bounds = _bundle_bounds(store)
    checker = _ChainChecker(store, log, keyring, use_cache=False)
    return _verify(store, bounds, p.target, tx, log, keyring, checker,
                   set(), set())


def _validate(store: LocalStore, bounds: Optional[dict[NodeId, int]], target: TxId,
              tx: Transaction, log: MainChain, keyring: Keyring,
              checker: _ChainChecker, valid_memo: set[TxId],
              verify_passed: set[TxId], visiting: set[TxId],
              unknown_memo: dict[TxId, str]) -> str:
    if target in valid_memo:
        return "valid"
    if target in unknown_memo:
        return "unknown"
    if target in visiting:
        return "unknown"
    visiting.add(target)
    try:
        verdict = _validate_inner(store, bounds, target, tx, log, keyring,
                                  checker, valid_memo, verify_passed, visiting,
                                  unknown_memo)
    finally:
        visiting.discard(target)
    if verdict == "valid":
        valid_memo.add(target)
    else:
        unknown_memo[target] = verdict
    return verdict


def _validate_inner(store, bounds, target, tx, log, keyring, checker,
                    valid_memo, verify_passed, visiting, unknown_memo) -> str:
    # Validity-proof check.
    if not _verify(store, bounds, target, tx, log, keyring, checker,
                   verify_passed, set()):
        return "unknown"
    genesis = tx.is_genesis and target.height == 1 and target.index == 1
    # Equality check (the initial-value transaction is exempt: it has no
    # sources by construction and carries the assigned value).
    if not genesis:
        total = 0
        for src in tx.sources:
            src_tx = store.tx_at(src)
            if src_tx is None:
                return "unknown"
            total += entitlement(src_tx, tx.sender)
        if total != tx.amount + tx.remainder:
            return "unknown"
    # Double-spending check: any other transaction in the sender's chain up
    # to the target's block sharing a source makes the verdict unknown.
    for src in tx.sources:
        for spender in store.spenders_of(target.sender, src):
            if spender != target and spender.height <= target.height:
                return "unknown"
    # Source check.
    for src in sorted(tx.sources):
        src_tx = store.tx_at(src)
        if src_tx is None:
            return "unknown"
        if _validate(store, bounds, src, src_tx, log, keyring, checker,
                     valid_memo, verify_passed, visiting, unknown_memo) != "valid":
            return "unknown"
    return "valid"


def validate(tx: Transaction, target: TxId, p: ProofBundle, log: MainChain,
             keyring: Keyring, store: Optional[LocalStore] = None) -> str:
    """The validation function: returns "valid" or "unknown".

    Runs the proof check, the equality check, the double-spending scan of
    the sender's chain, and the recursive source check, in that order.
    When `store` is given (and backs the bundle) its persistent caches are
    used and valid verdicts are memoized into it.
    """
    if store is not None and isinstance(p.blocks, _FrontierView) \
            and store is p.blocks._store:
        # Store-backed fast path: per-transaction minimal bounds, persistent
        # memoization of both verification passes and valid verdicts.
        checker = _ChainChecker(store, log, keyring, use_cache=True)
        return _validate(store, None, target, tx, log, keyring, checker,
                         store.validated, store.verify_passed, set(), {})
    work_store = p.blocks._store if isinstance(p.blocks, _FrontierView) \
        else LocalStore.from_blocks(p.blocks)
    bounds = dict(p.blocks._frontier) if isinstance(p.blocks, _FrontierView) \
        else _bundle_bounds(work_store)
    checker = _ChainChecker(work_store, log, keyring, use_cache=False)
    return _validate(work_store, bounds, target, tx, log, keyring, checker,
                     set(), set(), set(), {})


def validate_in_store(target: TxId, store: LocalStore, log: MainChain,
                      keyring: Keyring) -> str:
    """Validate a transaction the store already holds, building its minimal
    proof frontier internally.  Returns "unknown" when no proof exists."""
    tx = store.tx_at(target)
    if tx is None:
        return "unknown"
    try:
        bundle = build_proof(target, store, log)
    except ProofError:
        return "unknown"
    return validate(tx, target, bundle, log, keyring, store=store)
