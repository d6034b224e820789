"""Simulated total-order log of abstracts.

Stands in for a BFT consensus service: abstracts are queued, then sealed
into rounds in a deterministic order.  The log is append-only; once a
(node, height) pair is indexed it never changes.  Conflicting abstracts for
the same position are resolved first-sealed-wins and the conflict is kept
as an observable equivocation event.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional

from vtl.core import Abstract, Block, IndividualChain, NodeId, verify_abstract
from vtl.crypto import Keyring


@dataclass(frozen=True)
class MainChainBlock:
    round: int
    abstracts: tuple[Abstract, ...]


@dataclass(frozen=True)
class Equivocation:
    """A rejected conflicting abstract for an already-sealed position."""

    node: NodeId
    height: int
    sealed_hash: bytes
    rejected_hash: bytes
    round: int


class MainChain:
    """Deterministic in-process abstract log."""

    def __init__(self, keyring: Keyring):
        self.keyring = keyring
        self.blocks: list[MainChainBlock] = []
        self._queue: list[Abstract] = []
        # (node, height) -> (round, abstract)
        self._index: dict[tuple[NodeId, int], tuple[int, Abstract]] = {}
        # node -> sorted on-chain heights
        self._heights: dict[NodeId, list[int]] = {}
        self.equivocations: list[Equivocation] = []

    def submit_abstract(self, a: Abstract) -> bool:
        """Queue an abstract for the next sealing round.

        Rejects bad signatures immediately; positional conflicts are only
        resolved at sealing time.
        """
        if a.node not in self.keyring:
            return False
        if not verify_abstract(a, self.keyring.public(a.node), self.keyring.scheme):
            return False
        self._queue.append(a)
        return True

    def seal_round(self) -> MainChainBlock:
        """Drain the queue in (node, height) order into a new round."""
        rnd = len(self.blocks) + 1
        sealed: list[Abstract] = []
        # Stable sort: equal positions keep submission order, so the first
        # submitted conflicting abstract wins.
        for a in sorted(self._queue, key=lambda x: (x.node, x.height)):
            key = (a.node, a.height)
            if key in self._index:
                _, existing = self._index[key]
                if existing.block_hash != a.block_hash:
                    self.equivocations.append(
                        Equivocation(a.node, a.height, existing.block_hash,
                                     a.block_hash, rnd)
                    )
                continue
            self._index[key] = (rnd, a)
            bisect.insort(self._heights.setdefault(a.node, []), a.height)
            sealed.append(a)
        self._queue.clear()
        block = MainChainBlock(rnd, tuple(sealed))
        self.blocks.append(block)
        return block

    def is_on_chain(self, node: NodeId, height: int) -> Optional[int]:
        """Round in which (node, height) was sealed, or None."""
        entry = self._index.get((node, height))
        return entry[0] if entry else None

    def abstract_at(self, node: NodeId, height: int) -> Optional[Abstract]:
        entry = self._index.get((node, height))
        return entry[1] if entry else None

    def heights_of(self, node: NodeId) -> list[int]:
        """Sorted on-chain heights for `node`."""
        return self._heights.get(node, [])

    def first_height_at_or_after(self, node: NodeId, height: int) -> Optional[int]:
        """Smallest on-chain height >= `height` for `node`."""
        hs = self._heights.get(node)
        if not hs:
            return None
        i = bisect.bisect_left(hs, height)
        return hs[i] if i < len(hs) else None

    def max_height(self, node: NodeId) -> int:
        hs = self._heights.get(node)
        return hs[-1] if hs else 0

    def dump(self, path: str) -> None:
        """Line-delimited log: round node height hash-hex."""
        with open(path, "w") as fh:
            for blk in self.blocks:
                for a in blk.abstracts:
                    fh.write(f"{blk.round} {a.node} {a.height} {a.block_hash.hex()}\n")


def is_confirmed(b: Block, chain: IndividualChain, log: MainChain) -> bool:
    """A block is confirmed when some on-chain abstract at its height or later
    exists and every on-chain abstract up to that height matches the chain.

    Checking the smallest covering abstract suffices: the compliance set only
    grows with later anchors.
    """
    if chain.owner != b.owner:
        raise ValueError("chain owner does not match block owner")
    k_prime = log.first_height_at_or_after(b.owner, b.height)
    if k_prime is None:
        return False
    if len(chain.blocks) < k_prime:
        return False
    if chain.block_at(b.height) != b:
        return False
    # Hash linkage must hold up to the anchoring abstract, otherwise a
    # tampered interior block could hide between two anchored heights.
    for lower, upper in zip(chain.blocks[: k_prime - 1], chain.blocks[1:k_prime]):
        if upper.prev_hash != lower.hash:
            return False
    for height in log.heights_of(b.owner):
        if height > k_prime:
            break
        a = log.abstract_at(b.owner, height)
        if a.block_hash != chain.block_at(height).hash:
            return False
    return True
