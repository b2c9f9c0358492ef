"""Hashing and signature abstractions.

The hash is a pluggable 256-bit collision-resistant function, SHA-256 by
default, with the two ASCII domain-separation tags "AUTIG/salt" and
"AUTIG/frag". Rounds are hashed as 8-byte big-endian integers.

Signatures are pluggable. The default scheme for simulation is a keyed-MAC
style simulated signature where the verification key doubles as the MAC key;
it is deterministic and cheap but offers no unforgeability against parties
holding the key, which is fine inside a simulator that never models key
theft. An Ed25519 scheme backed by the cryptography package is provided for
interop-style tests.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Callable

from .encoding import encode_u64
from .errors import InvalidKey

SALT_TAG = b"AUTIG/salt"
FRAG_TAG = b"AUTIG/frag"

HashFn = Callable[[bytes], bytes]


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


DEFAULT_HASH: HashFn = sha256


def tx_digest(payload: bytes, hashfn: HashFn = DEFAULT_HASH) -> bytes:
    """Transaction id: digest of the opaque payload."""
    return hashfn(payload)


def compute_salt(
    h_prev: bytes, r: int, leader_pk: bytes, hashfn: HashFn = DEFAULT_HASH
) -> bytes:
    """Per-round tie-break salt bound to the previous digest and the leader."""
    return hashfn(h_prev + encode_u64(r) + leader_pk + SALT_TAG)


def hash_with_salt(txid: bytes, salt: bytes, hashfn: HashFn = DEFAULT_HASH) -> bytes:
    return hashfn(txid + salt)


class SignatureScheme:
    """Interface: deterministic keypairs from seeds, sign and verify."""

    name = "abstract"

    def keypair(self, seed: bytes):
        raise NotImplementedError

    def sign(self, secret: bytes, msg: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, pubkey: bytes, msg: bytes, sig: bytes) -> bool:
        raise NotImplementedError


class MacScheme(SignatureScheme):
    """Simulated signature: HMAC-SHA256 where pubkey == MAC key."""

    name = "mac"

    def keypair(self, seed: bytes):
        key = sha256(b"autig/sim-key" + seed)
        return key, key

    def sign(self, secret: bytes, msg: bytes) -> bytes:
        if len(secret) != 32:
            raise InvalidKey("mac key must be 32 bytes")
        return hmac.new(secret, msg, hashlib.sha256).digest()

    def verify(self, pubkey: bytes, msg: bytes, sig: bytes) -> bool:
        if len(pubkey) != 32:
            return False
        return hmac.compare_digest(hmac.new(pubkey, msg, hashlib.sha256).digest(), sig)


class Ed25519Scheme(SignatureScheme):
    """Real EdDSA signatures; keypairs derived deterministically from seeds."""

    name = "ed25519"

    def keypair(self, seed: bytes):
        from cryptography.hazmat.primitives.asymmetric import ed25519

        raw = sha256(b"autig/ed25519" + seed)
        sk = ed25519.Ed25519PrivateKey.from_private_bytes(raw)
        pk = sk.public_key().public_bytes_raw()
        return raw, pk

    def sign(self, secret: bytes, msg: bytes) -> bytes:
        from cryptography.hazmat.primitives.asymmetric import ed25519

        if len(secret) != 32:
            raise InvalidKey("ed25519 secret must be 32 bytes")
        return ed25519.Ed25519PrivateKey.from_private_bytes(secret).sign(msg)

    def verify(self, pubkey: bytes, msg: bytes, sig: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric import ed25519

        try:
            ed25519.Ed25519PublicKey.from_public_bytes(pubkey).verify(sig, msg)
            return True
        except (InvalidSignature, ValueError):
            return False


MAC_SCHEME = MacScheme()
ED25519_SCHEME = Ed25519Scheme()
