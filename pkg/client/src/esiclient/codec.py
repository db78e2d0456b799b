"""Value <-> wire-byte conversion, independent of the server implementation.

Encoding rules: LSB-first bit packing; struct fields in declaration order
from bit 0; array element 0 at bit 0; enums encode their variant index;
unions pack tag then payload then zero padding to the widest variant;
lists carry a 32-bit little-endian element count before their packed
elements. Bytes are the bit string zero-padded to whole little-endian
bytes. Values are plain data: ints, lists, dicts, and [tag, value] pairs
for unions.
"""

from __future__ import annotations

from .errors import ProtocolError, ShapeError
from .types import TypeDesc, _tag_bits, bit_width

LIST_HEADER_BITS = 32


def _pack(value, t: TypeDesc) -> int:
    """Value as an integer of exactly bit_width(t) bits."""
    if t.kind == "uint":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ShapeError(f"expected an int for uint{t.width}, got {value!r}")
        if value < 0 or value >> t.width:
            raise ShapeError(f"{value} out of range for uint{t.width}")
        return value
    if t.kind == "sint":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ShapeError(f"expected an int for sint{t.width}, got {value!r}")
        half = 1 << (t.width - 1)
        if not -half <= value < half:
            raise ShapeError(f"{value} out of range for sint{t.width}")
        return value & ((1 << t.width) - 1)
    if t.kind == "enum":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ShapeError(f"expected a variant index, got {value!r}")
        if not 0 <= value < len(t.members):
            raise ShapeError(f"enum index {value} out of range")
        return value
    if t.kind == "array":
        elem = t.members[0]
        if not isinstance(value, (list, tuple)) or len(value) != t.length:
            raise ShapeError(f"expected {t.length} array elements")
        w = bit_width(elem)
        acc = 0
        for i, item in enumerate(value):
            acc |= _pack(item, elem) << (i * w)
        return acc
    if t.kind == "struct":
        if not isinstance(value, dict):
            raise ShapeError("expected a dict for a struct value")
        names = [n for n, _ in t.members]
        if set(value) != set(names):
            raise ShapeError(f"struct needs exactly fields {names}")
        acc = 0
        off = 0
        for name, ft in t.members:
            acc |= _pack(value[name], ft) << off
            off += bit_width(ft)
        return acc
    if t.kind == "union":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ShapeError("union values are [tag_index, value]")
        tag, payload = value
        if not isinstance(tag, int) or isinstance(tag, bool):
            raise ShapeError("union tag must be an int")
        if not 0 <= tag < len(t.members):
            raise ShapeError(f"union tag {tag} out of range")
        tb = _tag_bits(len(t.members))
        return tag | (_pack(payload, t.members[tag][1]) << tb)
    raise ShapeError(f"cannot pack kind {t.kind!r}")


def _unpack(acc: int, t: TypeDesc):
    if t.kind == "uint":
        return acc
    if t.kind == "sint":
        return acc - (1 << t.width) if acc >> (t.width - 1) else acc
    if t.kind == "enum":
        if acc >= len(t.members):
            raise ProtocolError(f"enum tag {acc} out of range")
        return acc
    if t.kind == "array":
        elem = t.members[0]
        w = bit_width(elem)
        mask = (1 << w) - 1
        return [_unpack((acc >> (i * w)) & mask, elem) for i in range(t.length)]
    if t.kind == "struct":
        out = {}
        off = 0
        for name, ft in t.members:
            w = bit_width(ft)
            out[name] = _unpack((acc >> off) & ((1 << w) - 1), ft)
            off += w
        return out
    if t.kind == "union":
        tb = _tag_bits(len(t.members))
        tag = acc & ((1 << tb) - 1)
        if tag >= len(t.members):
            raise ProtocolError(f"union tag {tag} out of range")
        ft = t.members[tag][1]
        w = bit_width(ft)
        return [tag, _unpack((acc >> tb) & ((1 << w) - 1), ft)]
    raise ProtocolError(f"cannot unpack kind {t.kind!r}")


def message_bits(value, t: TypeDesc) -> tuple[int, int]:
    """(packed integer, bit length) for one message of type t."""
    if t.kind == "list":
        if not isinstance(value, (list, tuple)):
            raise ShapeError("expected a sequence for a list message")
        if len(value) >= 1 << 32:
            raise ShapeError("list length must be < 2**32")
        elem = t.members[0]
        w = bit_width(elem)
        acc = len(value)
        for i, item in enumerate(value):
            acc |= _pack(item, elem) << (LIST_HEADER_BITS + i * w)
        return acc, LIST_HEADER_BITS + len(value) * w
    return _pack(value, t), bit_width(t)


def encode(value, t: TypeDesc) -> bytes:
    acc, nbits = message_bits(value, t)
    return acc.to_bytes((nbits + 7) // 8, "little")


def expected_bits(t: TypeDesc, data: bytes) -> int:
    """Bit length of the message held in data (lists read their header)."""
    if t.kind == "list":
        if len(data) < 4:
            raise ProtocolError("list message shorter than its header")
        count = int.from_bytes(data[:4], "little")
        return LIST_HEADER_BITS + count * bit_width(t.members[0])
    return bit_width(t)


def decode(data: bytes, t: TypeDesc):
    nbits = expected_bits(t, data)
    if len(data) != (nbits + 7) // 8:
        raise ProtocolError(
            f"message of {len(data)} bytes cannot hold {nbits} bits"
        )
    acc = int.from_bytes(data, "little")
    if acc >> nbits:
        raise ProtocolError("nonzero padding bits in message")
    if t.kind == "list":
        elem = t.members[0]
        w = bit_width(elem)
        count = acc & ((1 << LIST_HEADER_BITS) - 1)
        mask = (1 << w) - 1
        return [
            _unpack((acc >> (LIST_HEADER_BITS + i * w)) & mask, elem)
            for i in range(count)
        ]
    return _unpack(acc, t)
