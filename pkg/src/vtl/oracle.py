"""Omniscient validity oracle (test-only).

Evaluates transaction validity directly from its definition, with global
access to every block ever produced and the abstract log: a transaction is
valid iff it sits on a tamper-proof (confirmed, signed) chain, all its
sources are valid, value is conserved, and no earlier valid transaction in
the same chain spends any of its sources.

Confirmation is anchored per transaction: the chain prefix up to the
smallest on-chain abstract covering the transaction must be reconstructible
by hash and compliant with every sealed abstract below that anchor.  (An
equivocation sealed at a *later* height therefore cannot retroactively
unconfirm an earlier transaction — matching the validator's view.)

This is written independently of the validation module on purpose: it is
the ground truth that the locally-executable validator is tested against.
"""

from __future__ import annotations

from typing import Optional

from vtl.core import Block, NodeId, Transaction, TxId
from vtl.mainchain import MainChain


class OracleWorld:
    """Every block ever created, keyed by producer, plus the shared log."""

    def __init__(self, log: MainChain):
        self.log = log
        self._by_node: dict[NodeId, list[Block]] = {}
        # (node, anchor height) -> reconstructed prefix or None
        self._prefix: dict[tuple[NodeId, int], Optional[list[Block]]] = {}
        self._verdicts: dict[TxId, str] = {}
        self._log_rounds = -1

    def _refresh(self) -> None:
        """Drop caches whenever the log has grown: newly sealed abstracts can
        both confirm previously unconfirmed positions and add compliance
        constraints below existing anchors."""
        if len(self.log.blocks) != self._log_rounds:
            self._log_rounds = len(self.log.blocks)
            self._prefix.clear()
            self._verdicts.clear()

    def record_block(self, b: Block) -> None:
        self._by_node.setdefault(b.owner, []).append(b)
        # New blocks may make a previously impossible reconstruction succeed;
        # recompute lazily and drop memoized verdicts.
        self._prefix = {k: v for k, v in self._prefix.items()
                        if k[0] != b.owner}
        self._verdicts.clear()

    def chain_prefix(self, node: NodeId, anchor: int) -> Optional[list[Block]]:
        """Blocks 1..anchor pinned by the on-chain abstract at `anchor`,
        reconstructed by hash-walking everything the node ever produced.

        None if no consistent prefix exists (nothing under that anchor is
        confirmed then).  `anchor` must itself be an on-chain height.
        """
        self._refresh()
        key = (node, anchor)
        if key in self._prefix:
            return self._prefix[key]
        chain = self._reconstruct(node, anchor)
        self._prefix[key] = chain
        return chain

    def _reconstruct(self, node: NodeId, anchor: int) -> Optional[list[Block]]:
        top = self.log.abstract_at(node, anchor)
        if top is None:
            return None
        by_hash = {b.hash: b for b in self._by_node.get(node, [])}
        blk = by_hash.get(top.block_hash)
        if blk is None or blk.height != anchor:
            return None
        chain: list[Optional[Block]] = [None] * anchor
        chain[anchor - 1] = blk
        while blk.height > 1:
            prev = by_hash.get(blk.prev_hash)
            if prev is None or prev.height != blk.height - 1:
                return None
            chain[prev.height - 1] = prev
            blk = prev
        if chain[0].prev_hash is not None:
            return None
        # Every sealed abstract below the anchor must agree.
        for h in self.log.heights_of(node):
            if h > anchor:
                break
            if self.log.abstract_at(node, h).block_hash != chain[h - 1].hash:
                return None
        return chain  # type: ignore[return-value]

    def _anchor_for(self, txid: TxId) -> Optional[int]:
        return self.log.first_height_at_or_after(txid.sender, txid.height)

    def confirmed_tx(self, txid: TxId) -> Optional[Transaction]:
        anchor = self._anchor_for(txid)
        if anchor is None:
            return None
        chain = self.chain_prefix(txid.sender, anchor)
        if chain is None:
            return None
        block = chain[txid.height - 1]
        if not 1 <= txid.index <= len(block.txs):
            return None
        return block.txs[txid.index - 1]

    def all_confirmed(self) -> list[tuple[TxId, Transaction]]:
        out = []
        for node in sorted(self._by_node):
            for height in range(1, self.log.max_height(node) + 1):
                anchor = self.log.first_height_at_or_after(node, height)
                if anchor is None:
                    continue
                chain = self.chain_prefix(node, anchor)
                if chain is None:
                    continue
                out.extend(chain[height - 1].txids())
        return out


def _owner_share(tx: Transaction, node: NodeId) -> int:
    """What `node` is entitled to draw when spending `tx`: the amount if it
    received it, the remainder if it sent it, everything for its own genesis."""
    if tx.sender == tx.receiver:
        return tx.amount + tx.remainder if node == tx.sender else 0
    if node == tx.receiver:
        return tx.amount
    if node == tx.sender:
        return tx.remainder
    return 0


def oracle_validate(target: TxId, world: OracleWorld) -> str:
    """Ground-truth verdict for a transaction position: "valid" or "invalid"."""
    return _judge(target, world, set())


def _judge(target: TxId, world: OracleWorld, visiting: set[TxId]) -> str:
    world._refresh()
    memo = world._verdicts
    if target in memo:
        return memo[target]
    if target in visiting:
        return "invalid"  # cyclic funding can never be grounded in a genesis
    visiting.add(target)
    try:
        verdict = "valid" if _holds(target, world, visiting) else "invalid"
    finally:
        visiting.discard(target)
    memo[target] = verdict
    return verdict


def _holds(target: TxId, world: OracleWorld, visiting: set[TxId]) -> bool:
    # Confirmed and authorized: on the signed, hash-pinned chain prefix.
    tx = world.confirmed_tx(target)
    if tx is None or tx.sender != target.sender:
        return False
    genesis = (
        not tx.sources
        and tx.sender == tx.receiver
        and target.height == 1
        and target.index == 1
    )
    # Valid sources.
    source_txs: dict[TxId, Transaction] = {}
    for src in tx.sources:
        if _judge(src, world, visiting) != "valid":
            return False
        source_txs[src] = world.confirmed_tx(src)
    # Value equality (the assigned initial value has nothing to balance).
    if not genesis:
        total = sum(_owner_share(source_txs[s], tx.sender) for s in tx.sources)
        if total != tx.amount + tx.remainder:
            return False
    # No double-spending: no earlier valid transaction in the same chain
    # uses any of these sources.
    if tx.sources:
        chain = world.chain_prefix(target.sender, world._anchor_for(target))
        for block in chain[: target.height]:
            done = False
            for other_id, other in block.txids():
                if (other_id.height, other_id.index) >= (target.height, target.index):
                    done = True
                    break
                if other.sources & tx.sources:
                    if _judge(other_id, world, visiting) == "valid":
                        return False
            if done:
                break
    return True
