"""Signature schemes and per-node key material.

Two schemes sit behind one interface:

* ``Ed25519Scheme`` -- real asymmetric signatures (the default for library
  use).  Keys are derived deterministically from a seed so fixtures are
  reproducible.
* ``StubScheme`` -- a hash-stamp scheme for simulation and test fixtures.
  It binds a signature to the public key and payload (so any data mutation
  or wrong-key verification fails) but is trivially forgeable by anyone who
  knows the public key.  Never use it outside a simulation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


class SignatureScheme:
    name: str = "abstract"

    def keygen(self, node: int, seed: bytes) -> tuple[bytes, bytes]:
        """Derive a (private, public) key pair for `node` from `seed`."""
        raise NotImplementedError

    def sign(self, private: bytes, payload: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, public: bytes, payload: bytes, signature: bytes) -> bool:
        raise NotImplementedError


class Ed25519Scheme(SignatureScheme):
    name = "ed25519"

    def keygen(self, node: int, seed: bytes) -> tuple[bytes, bytes]:
        private = hashlib.sha256(b"vtl-key" + seed + node.to_bytes(8, "big")).digest()
        pub = (
            Ed25519PrivateKey.from_private_bytes(private)
            .public_key()
            .public_bytes_raw()
        )
        return private, pub

    def sign(self, private: bytes, payload: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private).sign(payload)

    def verify(self, public: bytes, payload: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, payload)
            return True
        except (InvalidSignature, ValueError):
            return False


class StubScheme(SignatureScheme):
    """Deterministic test-only scheme: sig = H(pub || payload).

    Integrity-binding but not unforgeable; fine for in-process simulation
    where adversaries are our own code.
    """

    name = "stub"

    def keygen(self, node: int, seed: bytes) -> tuple[bytes, bytes]:
        private = hashlib.sha256(b"vtl-stub" + seed + node.to_bytes(8, "big")).digest()
        pub = hashlib.sha256(b"pub" + private).digest()
        return private, pub

    def sign(self, private: bytes, payload: bytes) -> bytes:
        pub = hashlib.sha256(b"pub" + private).digest()
        return hashlib.sha256(pub + payload).digest()

    def verify(self, public: bytes, payload: bytes, signature: bytes) -> bool:
        return signature == hashlib.sha256(public + payload).digest()


SCHEMES: dict[str, SignatureScheme] = {
    "ed25519": Ed25519Scheme(),
    "stub": StubScheme(),
}


@dataclass(frozen=True)
class Signer:
    """A node's signing handle."""

    node: int
    private: bytes
    public: bytes
    scheme: SignatureScheme

    def sign(self, payload: bytes) -> bytes:
        return self.scheme.sign(self.private, payload)


class Keyring:
    """Key registry standing in for the PKI: node id -> public key."""

    def __init__(self, scheme: SignatureScheme, seed: bytes = b""):
        self.scheme = scheme
        self._signers: dict[int, Signer] = {}

    @classmethod
    def generate(cls, n: int, scheme: SignatureScheme, seed: bytes = b"") -> "Keyring":
        ring = cls(scheme)
        for node in range(1, n + 1):
            priv, pub = scheme.keygen(node, seed)
            ring._signers[node] = Signer(node, priv, pub, scheme)
        return ring

    def signer(self, node: int) -> Signer:
        return self._signers[node]

    def public(self, node: int) -> bytes:
        return self._signers[node].public

    def __contains__(self, node: int) -> bool:
        return node in self._signers
