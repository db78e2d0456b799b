"""Pure-Python bit kernels.

Same surface as the compiled `_bitops` extension; selected by `bitops`
when the extension is unavailable. Bit order is LSB-first throughout:
bit i of a buffer lives in byte i >> 3 at position i & 7.
"""

from __future__ import annotations

BACKEND = "python"

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def extract_bits(data: bytes, bit_off: int, nbits: int) -> bytes:
    """Copy nbits starting at bit_off into a fresh LSB-first buffer."""
    if nbits <= 0:
        return b""
    first = bit_off >> 3
    last = (bit_off + nbits + 7) >> 3
    chunk = int.from_bytes(data[first:last], "little")
    chunk = (chunk >> (bit_off & 7)) & ((1 << nbits) - 1)
    return chunk.to_bytes((nbits + 7) >> 3, "little")


def deposit_bits(buf: bytearray, bit_off: int, data: bytes, nbits: int) -> None:
    """OR nbits from data (starting at its bit 0) into buf at bit_off.

    The target bits must be zero; the buffer must already be large enough.
    """
    if nbits <= 0:
        return
    val = int.from_bytes(data[: (nbits + 7) >> 3], "little") & ((1 << nbits) - 1)
    if not val:
        return
    val <<= bit_off & 7
    first = bit_off >> 3
    span = (((bit_off & 7) + nbits) + 7) >> 3
    region = int.from_bytes(buf[first : first + span], "little") | val
    buf[first : first + span] = region.to_bytes(span, "little")


def any_bit_set(data: bytes, bit_off: int, nbits: int) -> bool:
    """True if any of the nbits starting at bit_off is one."""
    if nbits <= 0:
        return False
    first = bit_off >> 3
    last = (bit_off + nbits + 7) >> 3
    chunk = int.from_bytes(data[first:last], "little")
    return bool((chunk >> (bit_off & 7)) & ((1 << nbits) - 1))


def fnv1a64(data: bytes, h: int = FNV64_OFFSET) -> int:
    """64-bit FNV-1a over data, chainable through h."""
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _U64
    return h
