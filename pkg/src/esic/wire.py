"""Bit-exact message encoding, width gearboxing, and list chunk repacking.

Message values are plain Python data shaped by their type:

    uint/sint  int
    enum       int (variant index)
    array      list of element values (exact length)
    struct     dict keyed by field name (all fields, nothing else)
    union      [tag_index, value] (tuple accepted on input)
    list       list of element values (any length < 2**32)

Bit order is LSB-first everywhere: bit 0 of a message is the first bit
transmitted and the least significant bit of byte 0. Struct fields pack in
declaration order starting at bit 0; array element 0 starts at bit 0; a
union packs its tag in the low bits, then the payload, then zero padding
up to the widest variant.

A list message is framed as a 32-bit little-endian element count followed
by the concatenated encoded elements; the frame is gearboxed over the
channel like any other bit stream, so one repacker serves both width
conversion and chunk-size gaskets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import bitops
from .errors import (
    BadTagError,
    BeatCountError,
    BitLengthError,
    MissingLastError,
    NonzeroPadError,
    ShapeMismatchError,
    TruncatedError,
    ValueRangeError,
    VariableSizeError,
)
from .types import (
    ArrayType,
    EnumType,
    EsiType,
    ListType,
    SIntType,
    StructType,
    UIntType,
    UnionType,
    bit_width,
    print_type,
    tag_width,
)

LIST_HEADER_BITS = 32
MAX_LIST_LEN = 2**32 - 1


class BitString:
    """Immutable LSB-first bit sequence backed by little-endian bytes.

    The byte form is also the cosim wire serialization: bit i lives in
    byte i >> 3 at position i & 7, and pad bits in the final byte are
    always zero.
    """

    __slots__ = ("_data", "_length")

    def __init__(self, data: bytes = b"", length: int | None = None):
        data = bytes(data)
        if length is None:
            length = 8 * len(data)
        if length < 0 or len(data) != (length + 7) // 8:
            raise BitLengthError(
                f"{len(data)} bytes cannot hold exactly {length} bits"
            )
        if length & 7 and data[-1] >> (length & 7):
            raise NonzeroPadError("padding bits beyond the bit length must be zero")
        self._data = data
        self._length = length

    @classmethod
    def _trusted(cls, data: bytes, length: int) -> "BitString":
        obj = object.__new__(cls)
        obj._data = data
        obj._length = length
        return obj

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        if value < 0 or value >> length:
            raise ValueRangeError(f"{value} does not fit in {length} bits")
        return cls._trusted(value.to_bytes((length + 7) // 8, "little"), length)

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitString":
        """Wire deserialization; verifies size and zero padding."""
        return cls(data, length)

    def to_int(self) -> int:
        return int.from_bytes(self._data, "little")

    def to_bytes(self) -> bytes:
        """Wire serialization: little-endian bytes, zero-padded."""
        return self._data

    def __len__(self) -> int:
        return self._length

    def bit(self, i: int) -> int:
        if not 0 <= i < self._length:
            raise BitLengthError(f"bit {i} out of range for length {self._length}")
        return (self._data[i >> 3] >> (i & 7)) & 1

    def window(self, start: int, nbits: int) -> "BitString":
        """nbits starting at start; positions past the end read as zero."""
        return BitString._trusted(
            bitops.extract_bits(self._data, start, nbits), nbits
        )

    def slice(self, start: int, nbits: int) -> "BitString":
        if start < 0 or nbits < 0 or start + nbits > self._length:
            raise BitLengthError(
                f"slice [{start}, {start + nbits}) outside length {self._length}"
            )
        return self.window(start, nbits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._length == other._length and self._data == other._data

    def __hash__(self) -> int:
        return hash((self._length, self._data))

    def __repr__(self) -> str:
        return f"BitString(0x{self.to_int():x}, len={self._length})"


class BitWriter:
    """Accumulates a fixed-size bit string; regions are written once."""

    def __init__(self, total_bits: int):
        self._buf = bytearray((total_bits + 7) // 8)
        self._total = total_bits

    def put_uint(self, offset: int, value: int, width: int) -> None:
        bitops.deposit_bits(
            self._buf, offset, value.to_bytes((width + 7) // 8, "little"), width
        )

    def put_bits(self, offset: int, bits: BitString) -> None:
        bitops.deposit_bits(self._buf, offset, bits._data, bits._length)

    def finish(self) -> BitString:
        return BitString._trusted(bytes(self._buf), self._total)


@dataclass(frozen=True)
class Beat:
    """One physical transfer: a channel-width bit vector plus a frame flag."""

    bits: BitString
    last: bool


def digest64(bits: BitString) -> int:
    """64-bit FNV-1a over the bit length and byte serialization."""
    h = bitops.fnv1a64(len(bits).to_bytes(8, "little"))
    return bitops.fnv1a64(bits.to_bytes(), h)


# --- validate / encode / decode -------------------------------------------


def _shape_error(t: EsiType, value, why: str) -> ShapeMismatchError:
    return ShapeMismatchError(f"value {value!r} does not fit {print_type(t)}: {why}")


def _walk(value, t: EsiType, writer: BitWriter | None, offset: int) -> None:
    if isinstance(t, UIntType):
        if not isinstance(value, int) or isinstance(value, bool):
            raise _shape_error(t, value, "expected an int")
        if value < 0 or value >> t.width:
            raise ValueRangeError(f"{value} out of range for {print_type(t)}")
        if writer:
            writer.put_uint(offset, value, t.width)
    elif isinstance(t, SIntType):
        if not isinstance(value, int) or isinstance(value, bool):
            raise _shape_error(t, value, "expected an int")
        lo, hi = -(1 << (t.width - 1)), 1 << (t.width - 1)
        if not lo <= value < hi:
            raise ValueRangeError(f"{value} out of range for {print_type(t)}")
        if writer:
            writer.put_uint(offset, value & ((1 << t.width) - 1), t.width)
    elif isinstance(t, EnumType):
        if not isinstance(value, int) or isinstance(value, bool):
            raise _shape_error(t, value, "expected a variant index")
        if not 0 <= value < len(t.variants):
            raise ValueRangeError(
                f"variant index {value} out of range for {print_type(t)}"
            )
        if writer:
            writer.put_uint(offset, value, tag_width(len(t.variants)))
    elif isinstance(t, ArrayType):
        if not isinstance(value, (list, tuple)):
            raise _shape_error(t, value, "expected a sequence")
        if len(value) != t.length:
            raise _shape_error(t, value, f"expected exactly {t.length} elements")
        w = bit_width(t.element)
        for i, item in enumerate(value):
            _walk(item, t.element, writer, offset + i * w)
    elif isinstance(t, StructType):
        if not isinstance(value, dict):
            raise _shape_error(t, value, "expected a dict")
        names = [n for n, _ in t.fields]
        if set(value.keys()) != set(names):
            raise _shape_error(t, value, f"expected exactly fields {names}")
        for name, ft in t.fields:
            _walk(value[name], ft, writer, offset)
            offset += bit_width(ft)
    elif isinstance(t, UnionType):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise _shape_error(t, value, "expected [tag_index, value]")
        tag, payload = value
        if not isinstance(tag, int) or isinstance(tag, bool):
            raise _shape_error(t, value, "tag must be an int")
        if not 0 <= tag < len(t.variants):
            raise ValueRangeError(f"tag {tag} out of range for {print_type(t)}")
        tw = tag_width(len(t.variants))
        if writer:
            writer.put_uint(offset, tag, tw)
        _walk(payload, t.variants[tag][1], writer, offset + tw)
    elif isinstance(t, ListType):
        raise VariableSizeError("lists are framed with frame_list, not encode")
    else:
        raise _shape_error(t, value, "unknown type")


def validate(value, t: EsiType) -> None:
    """Raise ShapeMismatchError/ValueRangeError unless value fits t exactly.

    List-typed channels validate as a list of fixed-size elements.
    """
    if isinstance(t, ListType):
        if not isinstance(value, (list, tuple)):
            raise _shape_error(t, value, "expected a sequence")
        if len(value) > MAX_LIST_LEN:
            raise ValueRangeError("list length must be < 2**32")
        for item in value:
            _walk(item, t.element, None, 0)
        return
    _walk(value, t, None, 0)


def encode(value, t: EsiType) -> BitString:
    """Canonical encoding of a fixed-size value; length == bit_width(t)."""
    width = bit_width(t)  # raises VariableSizeError for lists
    writer = BitWriter(width)
    _walk(value, t, writer, 0)
    return writer.finish()


def decode(bits: BitString, t: EsiType) -> object:
    """Inverse of encode; verifies length and tag ranges."""
    width = bit_width(t)
    if len(bits) != width:
        raise BitLengthError(
            f"{print_type(t)} needs {width} bits, got {len(bits)}"
        )
    return _read(bits, 0, t)


def _read(bits: BitString, offset: int, t: EsiType):
    if isinstance(t, UIntType):
        return bits.window(offset, t.width).to_int()
    if isinstance(t, SIntType):
        raw = bits.window(offset, t.width).to_int()
        if raw >> (t.width - 1):
            raw -= 1 << t.width
        return raw
    if isinstance(t, EnumType):
        tag = bits.window(offset, tag_width(len(t.variants))).to_int()
        if tag >= len(t.variants):
            raise BadTagError(f"enum tag {tag} >= {len(t.variants)} variants")
        return tag
    if isinstance(t, ArrayType):
        w = bit_width(t.element)
        return [_read(bits, offset + i * w, t.element) for i in range(t.length)]
    if isinstance(t, StructType):
        out = {}
        for name, ft in t.fields:
            out[name] = _read(bits, offset, ft)
            offset += bit_width(ft)
        return out
    if isinstance(t, UnionType):
        tw = tag_width(len(t.variants))
        tag = bits.window(offset, tw).to_int()
        if tag >= len(t.variants):
            raise BadTagError(f"union tag {tag} >= {len(t.variants)} variants")
        # padding beyond the selected variant is ignored
        return [tag, _read(bits, offset + tw, t.variants[tag][1])]
    raise VariableSizeError("lists are decoded with unframe_list")


# --- list framing ----------------------------------------------------------


def framed_length(elem: EsiType, count: int) -> int:
    """Total frame bits for a count-element list."""
    return LIST_HEADER_BITS + count * bit_width(elem)


def frame_list(values: Sequence, elem: EsiType) -> BitString:
    """32-bit little-endian count, then the concatenated encoded elements."""
    if not isinstance(values, (list, tuple)):
        raise ShapeMismatchError(f"expected a sequence of {print_type(elem)}")
    if len(values) > MAX_LIST_LEN:
        raise ValueRangeError("list length must be < 2**32")
    w = bit_width(elem)
    writer = BitWriter(framed_length(elem, len(values)))
    writer.put_uint(0, len(values), LIST_HEADER_BITS)
    off = LIST_HEADER_BITS
    for item in values:
        _walk(item, elem, writer, off)
        off += w
    return writer.finish()


def unframe_list(bits: BitString, elem: EsiType) -> list:
    """Inverse of frame_list; verifies the header against the bit length."""
    if len(bits) < LIST_HEADER_BITS:
        raise BitLengthError("list frame shorter than its 32-bit header")
    count = bits.window(0, LIST_HEADER_BITS).to_int()
    total = framed_length(elem, count)
    if len(bits) != total:
        raise BitLengthError(
            f"list frame of {count} elements needs {total} bits, got {len(bits)}"
        )
    w = bit_width(elem)
    return [
        _read(bits, LIST_HEADER_BITS + i * w, elem) for i in range(count)
    ]


def encode_message(value, t: EsiType) -> BitString:
    """Type-directed encoding: frame_list for lists, encode otherwise."""
    if isinstance(t, ListType):
        validate(value, t)
        return frame_list(list(value), t.element)
    return encode(value, t)


def decode_message(bits: BitString, t: EsiType):
    if isinstance(t, ListType):
        return unframe_list(bits, t.element)
    return decode(bits, t)


def message_byte_length(t: EsiType, payload: bytes | None = None) -> int:
    """Expected wire-byte count for one message of type t.

    For lists the count is read from payload's leading 32-bit header
    (payload must hold at least 4 bytes).
    """
    if isinstance(t, ListType):
        if payload is None or len(payload) < 4:
            raise BitLengthError("list message shorter than its header")
        count = int.from_bytes(payload[:4], "little")
        return (framed_length(t.element, count) + 7) // 8
    return (bit_width(t) + 7) // 8


def message_bit_length(t: EsiType, payload: bytes) -> int:
    if isinstance(t, ListType):
        if len(payload) < 4:
            raise BitLengthError("list message shorter than its header")
        count = int.from_bytes(payload[:4], "little")
        return framed_length(t.element, count)
    return bit_width(t)


# --- gearboxing ------------------------------------------------------------


def gearbox_split(bits: BitString, width: int) -> list[Beat]:
    """Split a message into ceil(len/width) beats; the final beat is
    zero-padded high and carries last=True."""
    if width < 1:
        raise ValueRangeError("beat width must be >= 1")
    if len(bits) < 1:
        raise BitLengthError("cannot split an empty bit string")
    count = -(-len(bits) // width)
    return [
        Beat(bits.window(k * width, width), k == count - 1) for k in range(count)
    ]


def gearbox_join(beats: Iterable[Beat], expected_bits: int) -> BitString:
    """Inverse of gearbox_split; verifies structure and zero padding."""
    beats = list(beats)
    if expected_bits < 1:
        raise BitLengthError("expected_bits must be >= 1")
    if not beats:
        raise BeatCountError("empty beat sequence")
    width = len(beats[0].bits)
    for b in beats:
        if len(b.bits) != width:
            raise BeatCountError("beat width varies within a message")
    last_at = next((i for i, b in enumerate(beats) if b.last), None)
    if last_at is None:
        raise MissingLastError("no beat carries the last flag")
    if last_at != len(beats) - 1:
        raise BeatCountError("last flag set before the final beat")
    if len(beats) != -(-expected_bits // width):
        raise BeatCountError(
            f"{expected_bits} bits at width {width} need "
            f"{-(-expected_bits // width)} beats, got {len(beats)}"
        )
    writer = BitWriter(expected_bits)
    for k, b in enumerate(beats[:-1]):
        writer.put_bits(k * width, b.bits)
    tail_bits = expected_bits - (len(beats) - 1) * width
    tail = beats[-1].bits
    if bitops.any_bit_set(tail._data, tail_bits, width - tail_bits):
        raise NonzeroPadError("nonzero padding in final beat")
    writer.put_bits((len(beats) - 1) * width, tail.window(0, tail_bits))
    return writer.finish()


# --- streaming repacker ----------------------------------------------------


class Repacker:
    """Streaming gasket converting a framed list stream between widths.

    Parses the 32-bit header to learn the message length, strips input
    padding, and re-emits the identical logical bit stream at the output
    width. Buffering is bounded by header + one beat of each width.
    Resets after each completed message, so a single instance serves a
    channel's whole message stream. Single-owner: not thread-safe.
    """

    def __init__(self, elem_width: int, w_in: int, w_out: int):
        if elem_width < 1:
            raise ValueRangeError("element width must be >= 1")
        if w_in < 1 or w_in % elem_width or w_out < 1 or w_out % elem_width:
            raise ValueRangeError(
                "chunk widths must be positive whole multiples of the element width"
            )
        self.elem_width = elem_width
        self.w_in = w_in
        self.w_out = w_out
        self._reset()

    def _reset(self) -> None:
        self._acc = 0
        self._acc_len = 0
        self._pushed = 0
        self._emitted = 0
        self._total: int | None = None

    @property
    def idle(self) -> bool:
        """True between messages."""
        return self._pushed == 0

    def _pop(self, last: bool) -> Beat:
        value = self._acc & ((1 << self.w_out) - 1)
        self._acc >>= self.w_out
        self._acc_len -= self.w_out
        self._emitted += self.w_out
        return Beat(BitString.from_int(value, self.w_out), last)

    def push(self, beat: Beat) -> list[Beat]:
        """Feed one input beat; returns output beats ready so far."""
        if len(beat.bits) != self.w_in:
            raise BeatCountError(
                f"input beat width {len(beat.bits)} != {self.w_in}"
            )
        self._acc |= beat.bits.to_int() << self._acc_len
        self._acc_len += self.w_in
        self._pushed += self.w_in
        if self._total is None and self._pushed >= LIST_HEADER_BITS:
            # nothing is emitted before the header completes, so the
            # count sits in the low bits of the accumulator
            count = self._acc & ((1 << LIST_HEADER_BITS) - 1)
            self._total = LIST_HEADER_BITS + count * self.elem_width
        out: list[Beat] = []
        if self._total is None:
            if beat.last:
                raise TruncatedError("stream ended inside the list header")
            return out
        if self._pushed >= self._total:
            if not beat.last:
                raise BeatCountError("beats continue past the message end")
            pad = self._pushed - self._total
            if pad and self._acc >> (self._acc_len - pad):
                raise NonzeroPadError("nonzero padding in final input beat")
            self._acc_len -= pad
            self._acc &= (1 << self._acc_len) - 1
            while self._acc_len > self.w_out:
                out.append(self._pop(last=False))
            value = self._acc
            out.append(Beat(BitString.from_int(value, self.w_out), True))
            self._reset()
            return out
        if beat.last:
            raise TruncatedError("stream ended before the header-implied length")
        while self._acc_len >= self.w_out and self._emitted + self.w_out < self._total:
            out.append(self._pop(last=False))
        return out


def repack(
    beats: Iterable[Beat], elem: EsiType, w_in: int, w_out: int
) -> list[Beat]:
    """Repack one complete framed-list message between chunk widths.

    Output is bit-identical to gearbox_split(frame, w_out) of the same
    logical frame. Streaming: see Repacker.
    """
    gasket = Repacker(bit_width(elem), w_in, w_out)
    out: list[Beat] = []
    done = False
    empty = True
    for beat in beats:
        empty = False
        if done:
            raise BeatCountError("beats after the final beat")
        out.extend(gasket.push(beat))
        if beat.last:
            done = True
    if empty:
        raise BeatCountError("empty beat sequence")
    if not done:
        raise TruncatedError("beat stream ended without a last flag")
    return out
