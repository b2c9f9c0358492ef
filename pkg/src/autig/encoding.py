"""Canonical byte encoding primitives.

Every protocol object is serialized with the same small vocabulary so that
digests and the on-disk fragment format are bit-exact across implementations:

* counts and rounds: 8-byte big-endian unsigned
* sequence lengths: 4-byte big-endian unsigned prefix
* transaction ids and digests: raw 32 bytes
* variable-length byte strings (keys, signatures): u32 length + raw bytes
* maps and sets: entries in ascending lexicographic key order

Decoding is strict: wrong widths, non-ascending map keys, unknown enum bytes
and trailing input all raise ParseError.
"""

from __future__ import annotations

from .errors import ParseError

DIGEST_LEN = 32


def encode_u64(value: int) -> bytes:
    if value < 0 or value >= 1 << 64:
        raise ParseError(f"u64 out of range: {value}")
    return value.to_bytes(8, "big")


def encode_u32(value: int) -> bytes:
    if value < 0 or value >= 1 << 32:
        raise ParseError(f"u32 out of range: {value}")
    return value.to_bytes(4, "big")


def encode_bytes32(value: bytes) -> bytes:
    if len(value) != DIGEST_LEN:
        raise ParseError(f"expected 32 bytes, got {len(value)}")
    return value


def encode_var_bytes(value: bytes) -> bytes:
    return encode_u32(len(value)) + value


class Reader:
    """Cursor over an immutable buffer with strict bounds checking."""

    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ParseError("truncated input")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def bytes32(self) -> bytes:
        return self.take(DIGEST_LEN)

    def var_bytes(self) -> bytes:
        return self.take(self.u32())

    def byte(self) -> int:
        return self.take(1)[0]

    def done(self) -> bool:
        return self.pos == len(self.buf)

    def expect_done(self) -> None:
        if not self.done():
            raise ParseError(f"{len(self.buf) - self.pos} trailing bytes")
