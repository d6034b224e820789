"""Core ledger data types, canonical encoding, hashing, and individual chains.

Every node keeps an individual hash-linked chain of blocks holding only the
transactions it has sent.  Abstracts are signed (node, height, block-hash)
digests that anchor a block on the shared log.  All hashing and signing goes
through the canonical byte encoding defined here, so the encoding is a frozen
wire contract: fixed-width big-endian integers, length-prefixed lists, and
source sets sorted ascending before encoding.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Iterator, Optional, Union

if TYPE_CHECKING:
    from vtl.crypto import SignatureScheme, Signer

NodeId = int

HASH_SIZE = 32

# Type tags keep the encoding injective across value kinds.
_TAG_TX = b"\x01"
_TAG_BLOCK = b"\x02"
_TAG_ABSTRACT = b"\x03"


class LedgerError(Exception):
    """Base class for ledger-level errors."""


def _u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


@dataclass(frozen=True, order=True)
class TxId:
    """Position of a transaction: block `height` and slot `index` (both 1-based)
    within `sender`'s individual chain."""

    sender: NodeId
    height: int
    index: int

    def encode(self) -> bytes:
        return _u64(self.sender) + _u64(self.height) + _u64(self.index)


@dataclass(frozen=True)
class Transaction:
    """A value transfer: `amount` goes to `receiver`, `remainder` stays with
    `sender`; `sources` name the spent transactions.

    Genesis transactions (and only those) have empty sources and
    sender == receiver, carrying the initial value in `remainder`.
    """

    sources: frozenset[TxId]
    sender: NodeId
    receiver: NodeId
    amount: int
    remainder: int

    def encode(self) -> bytes:
        parts = [_TAG_TX, _u32(len(self.sources))]
        for src in sorted(self.sources):
            parts.append(src.encode())
        parts.append(_u64(self.sender))
        parts.append(_u64(self.receiver))
        parts.append(_u64(self.amount))
        parts.append(_u64(self.remainder))
        return b"".join(parts)

    @property
    def is_genesis(self) -> bool:
        return not self.sources and self.sender == self.receiver


@dataclass(frozen=True)
class Block:
    """One block of an individual chain.  `prev_hash` is absent only at
    height 1; `txs` keep the sender's first-in-first-out order."""

    owner: NodeId
    height: int
    prev_hash: Optional[bytes]
    txs: tuple[Transaction, ...]

    def encode(self) -> bytes:
        prev = self.prev_hash or b""
        parts = [
            _TAG_BLOCK,
            _u64(self.owner),
            _u64(self.height),
            bytes([len(prev)]),
            prev,
            _u32(len(self.txs)),
        ]
        parts.extend(tx.encode() for tx in self.txs)
        return b"".join(parts)

    @cached_property
    def hash(self) -> bytes:
        return hashlib.sha256(self.encode()).digest()

    @cached_property
    def byte_size(self) -> int:
        return len(self.encode())

    def txids(self) -> Iterator[tuple[TxId, Transaction]]:
        for i, tx in enumerate(self.txs, start=1):
            yield TxId(self.owner, self.height, i), tx


@dataclass(frozen=True)
class Abstract:
    """Signed anchor of a block: (node, height, block hash) plus the owner's
    signature over the canonical payload."""

    node: NodeId
    height: int
    block_hash: bytes
    signature: bytes

    def payload(self) -> bytes:
        return abstract_payload(self.node, self.height, self.block_hash)


def abstract_payload(node: NodeId, height: int, block_hash: bytes) -> bytes:
    return _TAG_ABSTRACT + _u64(node) + _u64(height) + block_hash


def canonical_encode(value: Union[Transaction, Block, Abstract]) -> bytes:
    """Deterministic, injective byte encoding used for hashing and signing.

    For an Abstract this encodes the signed payload (node, height, hash),
    not the signature itself.
    """
    if isinstance(value, (Transaction, Block)):
        return value.encode()
    if isinstance(value, Abstract):
        return value.payload()
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


class DecodeError(LedgerError):
    """Malformed canonical bytes."""


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.offset:self.offset + n]
        self.offset += n
        return out

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def _read_transaction(r: _Reader) -> Transaction:
    if r.take(1) != _TAG_TX:
        raise DecodeError("expected transaction tag")
    n_sources = r.u32()
    sources = frozenset(
        TxId(r.u64(), r.u64(), r.u64()) for _ in range(n_sources))
    if len(sources) != n_sources:
        raise DecodeError("duplicate source in encoding")
    return Transaction(sources, r.u64(), r.u64(), r.u64(), r.u64())


def _read_block(r: _Reader) -> Block:
    if r.take(1) != _TAG_BLOCK:
        raise DecodeError("expected block tag")
    owner = r.u64()
    height = r.u64()
    prev_len = r.take(1)[0]
    prev = r.take(prev_len) if prev_len else None
    n_txs = r.u32()
    txs = tuple(_read_transaction(r) for _ in range(n_txs))
    return Block(owner, height, prev, txs)


def decode_transaction(data: bytes) -> Transaction:
    """Inverse of Transaction.encode; rejects trailing bytes."""
    r = _Reader(data)
    tx = _read_transaction(r)
    if r.offset != len(data):
        raise DecodeError("trailing bytes after transaction")
    return tx


def decode_block(data: bytes) -> Block:
    """Inverse of Block.encode; rejects trailing bytes."""
    r = _Reader(data)
    b = _read_block(r)
    if r.offset != len(data):
        raise DecodeError("trailing bytes after block")
    return b


def block_hash(b: Block) -> bytes:
    """SHA-256 of the canonical block encoding."""
    return b.hash


def make_abstract(signer: "Signer", b: Block) -> Abstract:
    """Sign an anchor for `b`.  The signing key must belong to the block owner."""
    if signer.node != b.owner:
        raise LedgerError(
            f"signer key belongs to node {signer.node}, block owner is {b.owner}"
        )
    payload = abstract_payload(b.owner, b.height, b.hash)
    return Abstract(b.owner, b.height, b.hash, signer.sign(payload))


def verify_abstract(a: Abstract, pubkey: bytes, scheme: "SignatureScheme") -> bool:
    """True iff the signature verifies over the canonical payload."""
    try:
        return scheme.verify(pubkey, a.payload(), a.signature)
    except Exception:
        return False


def genesis_block(owner: NodeId, initial_value: int) -> Block:
    """Height-1 block holding the initial-value transaction (no sources,
    sender == receiver == owner, full value in the remainder)."""
    if initial_value <= 0:
        raise LedgerError(f"initial value must be positive, got {initial_value}")
    tx = Transaction(frozenset(), owner, owner, 0, initial_value)
    return Block(owner, 1, None, (tx,))


class IndividualChain:
    """A node's own block sequence, heights contiguous from 1."""

    def __init__(self, genesis: Block):
        if genesis.height != 1 or genesis.prev_hash is not None:
            raise LedgerError("chain must start with a height-1 block")
        self.owner = genesis.owner
        self.blocks: list[Block] = [genesis]

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    def block_at(self, height: int) -> Block:
        if not 1 <= height <= len(self.blocks):
            raise LedgerError(f"no block at height {height}")
        return self.blocks[height - 1]

    def append_block(self, txs: list[Transaction]) -> Block:
        """Seal `txs` into the next block.  All txs must be sent by the owner."""
        if not txs:
            raise LedgerError("cannot append an empty block")
        for tx in txs:
            if tx.sender != self.owner:
                raise LedgerError(
                    f"transaction sender {tx.sender} is not chain owner {self.owner}"
                )
        b = Block(self.owner, self.tip.height + 1, self.tip.hash, tuple(txs))
        self.blocks.append(b)
        return b

    def verify_linkage(self) -> bool:
        for prev, cur in zip(self.blocks, self.blocks[1:]):
            if cur.prev_hash != prev.hash or cur.height != prev.height + 1:
                return False
        return True


def append_block(chain: IndividualChain, txs: list[Transaction]) -> Block:
    return chain.append_block(txs)
