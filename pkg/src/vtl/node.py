"""Per-node state machine.

Each node owns a wallet of spendable entitlements (transactions it received
plus its own change), an individual chain, a local block store, and a view
of what each peer already holds.  Source selection follows the naive local
optimization: among source sets covering the amount, pick the one shipping
the fewest chains the receiver does not have yet, preferring fewer sources
and breaking remaining ties lexicographically.

Byzantine deviations are pluggable behaviors; each profile deviates from
the honest protocol only in its named way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from vtl.core import (
    Block,
    IndividualChain,
    LedgerError,
    NodeId,
    Transaction,
    TxId,
    genesis_block,
    make_abstract,
)
from vtl.crypto import Keyring, Signer
from vtl.mainchain import MainChain
from vtl.validation import (
    Coord,
    LocalStore,
    ProofError,
    build_proof,
    validate,
    validate_in_store,
)

HONEST = "honest"
DOUBLE_SPENDER = "doubleSpender"
INFLATOR = "inflator"
EQUIVOCATOR = "equivocator"
PROOF_WITHHOLDER = "proofWithholder"

BEHAVIORS = (HONEST, DOUBLE_SPENDER, INFLATOR, EQUIVOCATOR, PROOF_WITHHOLDER)

RETRY_CAP = 3  # proof-fetch attempts per transaction before giving up
EXACT_SEARCH_LIMIT = 12  # wallet size up to which source selection is exhaustive

COORD_BYTES = 16  # serialized (owner, height) coordinate


class InsufficientFundsError(LedgerError):
    pass


# -- simulated wire messages -------------------------------------------------

@dataclass(frozen=True)
class TransactionAnnounce:
    txid: TxId
    tx: Transaction
    delta: tuple[Block, ...]

    @property
    def size_blocks(self) -> int:
        return len(self.delta)

    @property
    def size_bytes(self) -> int:
        return len(self.tx.encode()) + sum(b.byte_size for b in self.delta)


@dataclass(frozen=True)
class ProofRequest:
    txid: TxId
    knowledge: frozenset[Coord]

    size_blocks = 0

    @property
    def size_bytes(self) -> int:
        return 24 + COORD_BYTES * len(self.knowledge)


@dataclass(frozen=True)
class ProofResponse:
    txid: TxId
    delta: tuple[Block, ...]

    @property
    def size_blocks(self) -> int:
        return len(self.delta)

    @property
    def size_bytes(self) -> int:
        return sum(b.byte_size for b in self.delta)


@dataclass(frozen=True)
class KnowledgeAnnounce:
    coords: frozenset[Coord]

    size_blocks = 0

    @property
    def size_bytes(self) -> int:
        return COORD_BYTES * len(self.coords)


@dataclass(frozen=True)
class AbstractSubmit:
    node: NodeId
    height: int

    size_blocks = 0
    size_bytes = 120


class Node:
    """One participant: chain, store, wallet, peer knowledge, behavior."""

    def __init__(self, node_id: NodeId, signer: Signer, keyring: Keyring,
                 log: MainChain, initial_value: int,
                 behavior: str = HONEST):
        if behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {behavior!r}")
        self.id = node_id
        self.signer = signer
        self.keyring = keyring
        self.log = log
        self.behavior = behavior
        self.chain = IndividualChain(genesis_block(node_id, initial_value))
        self.store = LocalStore()
        self.store.add_block(self.chain.tip)
        self.wallet: dict[TxId, int] = {}
        self.pending_txs: list[Transaction] = []
        self.awaiting_height: Optional[int] = None
        self.confirmed_height = 0  # own chain height known sealed
        # peer -> coordinates the peer is believed to hold
        self.knowledge: dict[NodeId, set[Coord]] = {}
        # value committed to created-but-not-yet-settled transactions
        self.in_flight = 0
        # spent entitlements eligible for a double-spender's re-use:
        # (source txid, entitlement), only once the first spend is sealed
        self._reusable: list[tuple[TxId, int]] = []
        self._spent_pending: list[tuple[TxId, int]] = []
        self.created_count = 0

    # -- wallet ----------------------------------------------------------

    def balance(self) -> int:
        return sum(self.wallet.values())

    def _known_by(self, peer: NodeId) -> set[Coord]:
        return self.knowledge.setdefault(peer, set())

    # -- source selection (local optimization) ---------------------------

    def smart_transact(self, receiver: NodeId, amount: int) -> list[TxId]:
        """Pick a source set covering `amount` that minimizes the number of
        chains the receiver would still have to collect."""
        entries = sorted(self.wallet.items())
        if sum(e for _, e in entries) < amount:
            raise InsufficientFundsError(
                f"node {self.id}: balance {self.balance()} < {amount}")
        collected = {owner for owner, _ in self._known_by(receiver)}
        collected.add(receiver)  # a node trivially holds its own chain
        masks = []
        for txid, ent in entries:
            mask = 0
            for owner in self.store.closure_chains(txid, self.log):
                if owner not in collected:
                    mask |= 1 << owner
            masks.append((txid, ent, mask))
        if len(masks) <= EXACT_SEARCH_LIMIT:
            return self._select_exact(masks, amount)
        return self._select_greedy(masks, amount)

    @staticmethod
    def _select_exact(masks: list[tuple[TxId, int, int]],
                      amount: int) -> list[TxId]:
        best: Optional[tuple[int, tuple[TxId, ...]]] = None
        # Sizes ascending: among equal chain costs fewer sources win, so once
        # a zero-cost set exists at some size nothing larger can beat it.
        for size in range(1, len(masks) + 1):
            for combo in combinations(masks, size):
                if sum(m[1] for m in combo) < amount:
                    continue
                cost = 0
                union = 0
                for m in combo:
                    union |= m[2]
                cost = union.bit_count()
                key = (cost, tuple(m[0] for m in combo))
                if best is None or key < (best[0], best[1]):
                    best = key
            if best is not None and best[0] == 0:
                break
        if best is None:
            raise InsufficientFundsError("no covering source set")
        return list(best[1])

    @staticmethod
    def _select_greedy(masks: list[tuple[TxId, int, int]],
                       amount: int) -> list[TxId]:
        chosen: list[TxId] = []
        covered = 0
        total = 0
        remaining = list(masks)
        while total < amount:
            remaining.sort(key=lambda m: ((m[2] & ~covered).bit_count(), m[0]))
            txid, ent, mask = remaining.pop(0)
            chosen.append(txid)
            covered |= mask
            total += ent
        return chosen

    # -- transaction creation --------------------------------------------

    def create_transaction(self, receiver: NodeId, amount: int) -> Transaction:
        """Build and queue a transaction; consumes the chosen entitlements."""
        sources = self.smart_transact(receiver, amount)
        total = sum(self.wallet[s] for s in sources)
        remainder = total - amount
        tx = Transaction(frozenset(sources), self.id, receiver, amount, remainder)
        for s in sources:
            self._spent_pending.append((s, self.wallet.pop(s)))
        self.pending_txs.append(tx)
        self.in_flight += total
        self.created_count += 1
        return tx

    # -- abstract submission ---------------------------------------------

    def maybe_submit_abstract(self) -> Optional[tuple[Block, list]]:
        """Seal pending transactions into a block and submit its abstract,
        but only when the previous abstract is already on-chain (at most one
        abstract in flight)."""
        if self.awaiting_height is not None:
            if self.log.is_on_chain(self.id, self.awaiting_height) is None:
                return None
            self.awaiting_height = None
        if not self.pending_txs:
            return None
        block = self.chain.append_block(self.pending_txs)
        self.pending_txs = []
        self.store.add_block(block)
        self.awaiting_height = block.height
        self._reusable.extend(self._spent_pending)
        self._spent_pending = []
        abstracts = [make_abstract(self.signer, block)]
        extra_blocks = []
        if self.behavior == EQUIVOCATOR:
            alt = self._equivocate(block)
            abstracts.append(make_abstract(self.signer, alt))
            extra_blocks.append(alt)
        return block, abstracts, extra_blocks

    def _equivocate(self, block: Block) -> Block:
        """A conflicting block for the same height (different contents)."""
        filler = Transaction(frozenset(), self.id, self.id, 0, 0)
        return Block(block.owner, block.height, block.prev_hash,
                     block.txs + (filler,))

    # -- confirmation ----------------------------------------------------

    def collect_confirmations(self) -> list[tuple[TxId, Transaction]]:
        """Credit remainders of newly sealed own blocks and return the
        transactions that should now be announced to their receivers."""
        announcements: list[tuple[TxId, Transaction]] = []
        new_top = self.log.max_height(self.id)
        while self.confirmed_height < new_top \
                and self.confirmed_height < self.chain.tip.height:
            height = self.confirmed_height + 1
            block = self.chain.block_at(height)
            for txid, tx in block.txids():
                if tx.remainder > 0 or tx.is_genesis:
                    self.wallet[txid] = self.wallet.get(txid, 0) + tx.remainder
                    self.in_flight -= tx.remainder
                if height == 1 and tx.is_genesis:
                    # initial value: nothing was in flight
                    self.wallet[txid] = tx.amount + tx.remainder
                    self.in_flight += tx.remainder
                if tx.receiver != self.id:
                    announcements.append((txid, tx))
            self.confirmed_height = height
        return announcements

    # -- proof transfer --------------------------------------------------

    def proof_delta(self, target: TxId, receiver: NodeId,
                    authoritative: Optional[Iterable[Coord]] = None) -> list[Block]:
        """Blocks of the target's proof the receiver is believed to miss.

        `authoritative` (a proof request's explicit coordinate set) replaces
        any accumulated belief about the receiver — a stale or lying belief
        must not survive an explicit request.  Blocks of the receiver's own
        chain are never shipped back to it.
        """
        frontier = self.store.proof_frontier(target, self.log)
        if authoritative is not None:
            known = set(authoritative)
            self.knowledge[receiver] = known
        else:
            known = self._known_by(receiver)
        delta = []
        for owner in sorted(frontier):
            if owner == receiver:
                continue
            for h in range(1, frontier[owner] + 1):
                if (owner, h) not in known:
                    delta.append(self.store.block(owner, h))
        # After shipping, the receiver holds the whole frontier.
        for owner, upto in frontier.items():
            if owner != receiver:
                known.update((owner, h) for h in range(1, upto + 1))
        return delta

    def make_announce(self, target: TxId, tx: Transaction) -> TransactionAnnounce:
        if self.behavior == PROOF_WITHHOLDER:
            return TransactionAnnounce(target, tx, ())
        try:
            delta = self.proof_delta(target, tx.receiver)
        except ProofError:
            delta = []
        return TransactionAnnounce(target, tx, tuple(delta))

    def handle_proof_request(self, req: ProofRequest,
                             requester: NodeId) -> Optional[ProofResponse]:
        """Answer a proof fetch; a withholder never does."""
        if self.behavior == PROOF_WITHHOLDER:
            return None
        try:
            delta = self.proof_delta(req.txid, requester,
                                     authoritative=req.knowledge)
        except ProofError:
            return None
        return ProofResponse(req.txid, tuple(delta))

    # -- receiving -------------------------------------------------------

    def absorb_blocks(self, sender: NodeId, blocks: Iterable[Block]) -> int:
        """Merge delivered blocks; the sender evidently holds them all."""
        known = self._known_by(sender)
        fresh = 0
        for b in blocks:
            if self.store.add_block(b):
                fresh += 1
            known.add((b.owner, b.height))
        return fresh

    def receive_transaction(self, sender: NodeId,
                            ann: TransactionAnnounce) -> str:
        """Merge the delta and validate; "accepted" or "retry"."""
        self.absorb_blocks(sender, ann.delta)
        verdict = validate_in_store(ann.txid, self.store, self.log,
                                    self.keyring)
        if verdict == "valid":
            self._accept(sender, ann.txid, ann.tx)
            return "accepted"
        return "retry"

    def receive_proof_response(self, sender: NodeId, txid: TxId,
                               tx: Transaction,
                               resp: Optional[ProofResponse]) -> str:
        if resp is not None:
            self.absorb_blocks(sender, resp.delta)
        verdict = validate_in_store(txid, self.store, self.log, self.keyring)
        if verdict == "valid":
            self._accept(sender, txid, tx)
            return "accepted"
        return "retry"

    def _accept(self, sender: NodeId, txid: TxId, tx: Transaction) -> None:
        self.wallet[txid] = self.wallet.get(txid, 0) + tx.amount
        # The sender necessarily holds the proof it just demonstrated.
        try:
            frontier = self.store.proof_frontier(txid, self.log)
        except ProofError:
            frontier = {}
        known = self._known_by(sender)
        for owner, upto in frontier.items():
            known.update((owner, h) for h in range(1, upto + 1))

    # -- knowledge announcements (interactive mode) ----------------------

    def announce_knowledge(self) -> KnowledgeAnnounce:
        return KnowledgeAnnounce(frozenset(self.store.coords()))

    def learn_knowledge(self, peer: NodeId, msg: KnowledgeAnnounce) -> None:
        self.knowledge[peer] = set(msg.coords)

    # -- sharding metric -------------------------------------------------

    def acquired_chain_count(self) -> int:
        """Chains appearing in the proofs of currently owned values."""
        owners: set[NodeId] = set()
        for txid in self.wallet:
            try:
                owners.update(self.store.closure_chains(txid, self.log))
            except ProofError:
                owners.add(txid.sender)
        if not owners:
            owners.add(self.id)
        return len(owners)

    # -- byzantine extras ------------------------------------------------

    def double_spend(self, receiver: NodeId) -> Optional[Transaction]:
        """Re-spend an already-sealed spent source (doubleSpender only).

        The conflicting transaction always lands in a later block than the
        original spend, so the two never share a block.
        """
        if not self._reusable:
            return None
        source, ent = self._reusable.pop(0)
        tx = Transaction(frozenset([source]), self.id, receiver, ent, 0)
        self.pending_txs.append(tx)
        self.created_count += 1
        return tx

    def inflate(self, receiver: NodeId, amount: int) -> Optional[Transaction]:
        """Create a value-inflating transaction (inflator only): the
        remainder overstates the change, violating the equality check."""
        try:
            sources = self.smart_transact(receiver, amount)
        except InsufficientFundsError:
            return None
        total = sum(self.wallet[s] for s in sources)
        tx = Transaction(frozenset(sources), self.id, receiver, amount,
                         total - amount + amount + 1)
        for s in sources:
            # Deliberately burned: the inflator's invalid change is useless.
            self.wallet.pop(s)
        self.pending_txs.append(tx)
        self.created_count += 1
        return tx
