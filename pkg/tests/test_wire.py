"""Bit-exact encoding, gearboxing, framing, and the streaming repacker."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esic import wire
from esic.errors import (
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
from esic.random_data import random_fixed_type, random_value
from esic.types import (
    EnumType,
    ListType,
    SIntType,
    UIntType,
    UnionType,
    bit_width,
    parse_type,
)
from esic.wire import (
    Beat,
    BitString,
    decode,
    encode,
    frame_list,
    gearbox_join,
    gearbox_split,
    repack,
    unframe_list,
    validate,
)


def bits_of(value: int, length: int) -> BitString:
    return BitString.from_int(value, length)


class TestEncode:
    def test_struct_fields_pack_from_bit_zero(self):
        t = parse_type("struct{a:uint4,b:uint4}")
        e = encode({"a": 0x3, "b": 0xA}, t)
        assert e.to_bytes() == b"\xa3"

    def test_enum_encodes_its_index(self):
        t = EnumType(tuple("ABCDE"))
        e = encode(2, t)
        assert len(e) == 3 and e.to_int() == 2

    def test_union_tag_low_payload_then_padding(self):
        t = parse_type("union{a:uint3,b:uint9}")
        e = encode([0, 0b101], t)
        assert len(e) == 10
        # tag 0 at bit 0, payload 101 in bits 1..3, zeros above
        assert e.to_int() == 0b101 << 1

    def test_union_other_variant(self):
        t = parse_type("union{a:uint3,b:uint9}")
        e = encode([1, 0x1FF], t)
        assert e.to_int() == 1 | (0x1FF << 1)

    def test_sint_twos_complement(self):
        assert encode(-1, SIntType(4)).to_int() == 0xF
        assert encode(-8, SIntType(4)).to_int() == 0x8
        assert decode(bits_of(0xF, 4), SIntType(4)) == -1

    def test_array_element_zero_first(self):
        t = parse_type("array<uint4,3>")
        e = encode([1, 2, 3], t)
        assert e.to_int() == 1 | (2 << 4) | (3 << 8)

    def test_length_always_bit_width(self):
        rng = random.Random(5)
        for _ in range(300):
            t = random_fixed_type(rng, 4, 48)
            v = random_value(rng, t)
            assert len(encode(v, t)) == bit_width(t)

    def test_shape_errors(self):
        t = parse_type("struct{a:uint4,b:uint4}")
        with pytest.raises(ShapeMismatchError):
            encode({"a": 1}, t)
        with pytest.raises(ShapeMismatchError):
            encode({"a": 1, "b": 2, "c": 3}, t)
        with pytest.raises(ShapeMismatchError):
            encode([1, 2], t)
        with pytest.raises(ShapeMismatchError):
            encode({"a": True, "b": 0}, t)  # bools are not message ints

    def test_range_errors(self):
        with pytest.raises(ValueRangeError):
            encode(16, UIntType(4))
        with pytest.raises(ValueRangeError):
            encode(-1, UIntType(4))
        with pytest.raises(ValueRangeError):
            encode(8, SIntType(4))
        with pytest.raises(ValueRangeError):
            encode(5, EnumType(tuple("ABCDE")))
        with pytest.raises(ValueRangeError):
            encode([2, 0], UnionType((("a", UIntType(1)), ("b", UIntType(1)))))

    def test_lists_use_frame_list(self):
        with pytest.raises(VariableSizeError):
            encode([1], ListType(UIntType(8)))


class TestDecode:
    def test_struct_inverse(self):
        t = parse_type("struct{a:uint4,b:uint4}")
        assert decode(BitString(b"\xa3", 8), t) == {"a": 3, "b": 10}

    def test_bad_enum_tag(self):
        t = EnumType(tuple("ABCDE"))
        assert decode(bits_of(3, 3), t) == 3
        with pytest.raises(BadTagError):
            decode(bits_of(5, 3), t)

    def test_bad_union_tag(self):
        t3 = UnionType((("a", UIntType(2)), ("b", UIntType(2)), ("c", UIntType(2))))
        with pytest.raises(BadTagError):
            decode(bits_of(3, 4), t3)  # tag 3 >= 3 variants

    def test_union_padding_ignored(self):
        t = parse_type("union{a:uint3,b:uint9}")
        # tag 0 selects the 3-bit variant; set nonzero padding above it
        raw = bits_of(0 | (0b101 << 1) | (0b11 << 8), 10)
        assert decode(raw, t) == [0, 0b101]

    def test_length_mismatch(self):
        with pytest.raises(BitLengthError):
            decode(bits_of(0, 9), UIntType(8))

    def test_roundtrip_random(self):
        rng = random.Random(42)
        for _ in range(1000):
            t = random_fixed_type(rng, 5, 64)
            v = random_value(rng, t)
            assert decode(encode(v, t), t) == v

    def test_reencode_is_identity_on_canonical_bits(self):
        # encode(decode(bits)) == bits whenever tags are valid and union
        # padding is zero, i.e. on every canonically encoded message
        rng = random.Random(43)
        for _ in range(500):
            t = random_fixed_type(rng, 4, 48)
            bits = encode(random_value(rng, t), t)
            assert encode(decode(bits, t), t) == bits

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, seed):
        rng = random.Random(seed)
        t = random_fixed_type(rng, 5, 64)
        v = random_value(rng, t)
        assert decode(encode(v, t), t) == v


class TestGearbox:
    def test_ten_bits_at_width_four(self):
        bits = bits_of(0b11_1111_1111, 10)
        beats = gearbox_split(bits, 4)
        assert len(beats) == 3
        assert [b.last for b in beats] == [False, False, True]
        assert beats[2].bits.to_int() == 0b11  # two data bits, two zero pads
        assert all(len(b.bits) == 4 for b in beats)

    def test_exact_fit_single_beat(self):
        beats = gearbox_split(bits_of(0xAB, 8), 8)
        assert len(beats) == 1 and beats[0].last

    def test_72_bit_stream_at_16(self):
        assert len(gearbox_split(bits_of(0, 72), 16)) == 5

    def test_join_inverse(self):
        rng = random.Random(9)
        for _ in range(300):
            n = rng.randint(1, 120)
            b = bits_of(rng.getrandbits(n), n)
            w = rng.randint(1, 2 * n)
            assert gearbox_join(gearbox_split(b, w), n) == b

    @given(n=st.integers(1, 200), w=st.integers(1, 400), seed=st.integers(0, 2**31))
    @settings(max_examples=200, deadline=None)
    def test_join_inverse_property(self, n, w, seed):
        b = bits_of(random.Random(seed).getrandbits(n), n)
        assert gearbox_join(gearbox_split(b, w), n) == b

    def test_empty_sequence_rejected(self):
        with pytest.raises(BeatCountError):
            gearbox_join([], 8)

    def test_nonzero_pad_rejected(self):
        beats = gearbox_split(bits_of(0x3FF, 10), 4)
        poisoned = beats[:2] + [Beat(bits_of(0b1100, 4), True)]
        with pytest.raises(NonzeroPadError):
            gearbox_join(poisoned, 10)

    def test_missing_last_rejected(self):
        beats = [Beat(bits_of(1, 4), False), Beat(bits_of(2, 4), False)]
        with pytest.raises(MissingLastError):
            gearbox_join(beats, 8)

    def test_early_last_rejected(self):
        beats = [Beat(bits_of(1, 4), True), Beat(bits_of(2, 4), True)]
        with pytest.raises(BeatCountError):
            gearbox_join(beats, 8)

    def test_wrong_count_rejected(self):
        beats = gearbox_split(bits_of(0xFF, 8), 4)
        with pytest.raises(BeatCountError):
            gearbox_join(beats, 12)

    def test_split_empty_rejected(self):
        with pytest.raises(BitLengthError):
            gearbox_split(BitString(b"", 0), 4)


class TestListFraming:
    def test_five_bytes_is_72_bits(self):
        f = frame_list([1, 2, 3, 4, 5], UIntType(8))
        assert len(f) == 72
        assert f.window(0, 32).to_int() == 5
        assert f.window(32 + 8, 8).to_int() == 2

    def test_empty_list_is_header_only(self):
        f = frame_list([], UIntType(8))
        assert len(f) == 32 and f.to_int() == 0

    def test_unframe_inverse(self):
        rng = random.Random(3)
        for _ in range(200):
            elem = random_fixed_type(rng, 3, 24)
            values = [random_value(rng, elem) for _ in range(rng.randint(0, 12))]
            assert unframe_list(frame_list(values, elem), elem) == values

    def test_unframe_length_checked(self):
        f = frame_list([1, 2], UIntType(8))
        with pytest.raises(BitLengthError):
            unframe_list(f.window(0, 40), UIntType(8))


def oracle_repack(beats, elem, w_in, w_out):
    """Non-streaming gasket: join the whole frame, then re-split."""
    header = gearbox_join(beats, len(beats) * w_in)  # padded view
    count = header.window(0, 32).to_int()
    total = 32 + count * bit_width(elem)
    logical = gearbox_join(beats, total)
    return gearbox_split(logical, w_out)


class TestRepack:
    def test_five_element_chunk_pair(self):
        elem = UIntType(8)
        f = frame_list([1, 2, 3, 4, 5], elem)
        beats_in = gearbox_split(f, 16)
        assert len(beats_in) == 5
        out = repack(beats_in, elem, 16, 24)
        assert len(out) == 3
        assert out == gearbox_split(f, 24)

    def test_identity_chunks(self):
        elem = UIntType(8)
        f = frame_list(list(range(7)), elem)
        beats = gearbox_split(f, 16)
        assert repack(beats, elem, 16, 16) == beats

    def test_against_oracle(self):
        rng = random.Random(77)
        for _ in range(400):
            width = rng.randint(1, 32)
            elem = UIntType(width)
            values = [rng.getrandbits(width) for _ in range(rng.randint(0, 10))]
            c_in, c_out = rng.randint(1, 8), rng.randint(1, 8)
            beats = gearbox_split(frame_list(values, elem), c_in * width)
            got = repack(beats, elem, c_in * width, c_out * width)
            assert got == oracle_repack(beats, elem, c_in * width, c_out * width)

    def test_streaming_emits_before_end(self):
        # wide-to-narrow: output beats appear while input is still arriving
        elem = UIntType(8)
        f = frame_list(list(range(20)), elem)
        gasket = wire.Repacker(8, 64, 8)
        beats = gearbox_split(f, 64)
        early = gasket.push(beats[0])
        assert len(early) > 0 and not any(b.last for b in early)
        for b in beats[1:]:
            early.extend(gasket.push(b))
        assert early == gearbox_split(f, 8)

    def test_serves_back_to_back_messages(self):
        elem = UIntType(4)
        gasket = wire.Repacker(4, 8, 12)
        for values in ([1, 2, 3], [], [15] * 9):
            f = frame_list(values, elem)
            out = []
            for b in gearbox_split(f, 8):
                out.extend(gasket.push(b))
            assert out == gearbox_split(f, 12)

    def test_truncated_stream(self):
        elem = UIntType(8)
        beats = gearbox_split(frame_list([1, 2, 3, 4, 5], elem), 16)
        with pytest.raises(TruncatedError):
            repack(beats[:-1], elem, 16, 24)
        short = beats[:2] + [Beat(beats[2].bits, True)]
        with pytest.raises(TruncatedError):
            repack(short, elem, 16, 24)

    def test_truncated_inside_header(self):
        elem = UIntType(1)
        beats = gearbox_split(frame_list([1, 0, 1], elem), 2)
        with pytest.raises(TruncatedError):
            repack(beats[:3], elem, 2, 2)

    def test_empty_and_overrun(self):
        elem = UIntType(8)
        with pytest.raises(BeatCountError):
            repack([], elem, 16, 24)
        beats = gearbox_split(frame_list([1], elem), 16)
        with pytest.raises(BeatCountError):
            repack(beats + beats, elem, 16, 24)

    def test_chunk_widths_validated(self):
        with pytest.raises(ValueRangeError):
            wire.Repacker(8, 12, 16)  # 12 is not a whole number of bytes

    def test_beat_count_formula(self):
        rng = random.Random(21)
        for _ in range(200):
            w = rng.randint(1, 32)
            n = rng.randint(0, 20)
            c = rng.randint(1, 8)
            elem = UIntType(w)
            beats = gearbox_split(
                frame_list([rng.getrandbits(w) for _ in range(n)], elem), c * w
            )
            assert len(beats) == -(-(32 + n * w) // (c * w))


class TestByteSerialization:
    def test_padded_little_endian(self):
        b = bits_of(0x1A3, 10)
        assert b.to_bytes() == bytes([0xA3, 0x01])
        assert BitString.from_bytes(bytes([0xA3, 0x01]), 10) == b

    def test_pad_bits_checked(self):
        with pytest.raises(NonzeroPadError):
            BitString.from_bytes(bytes([0xA3, 0x04]), 10)
        with pytest.raises(BitLengthError):
            BitString.from_bytes(bytes([0xA3]), 10)

    def test_roundtrip(self):
        rng = random.Random(12)
        for _ in range(200):
            n = rng.randint(1, 90)
            b = bits_of(rng.getrandbits(n), n)
            assert BitString.from_bytes(b.to_bytes(), n) == b


class TestWideValues:
    def test_width_cap_scalar_roundtrips(self):
        t = parse_type("uint4096")
        v = (1 << 4096) - 1
        bits = encode(v, t)
        assert len(bits) == 4096
        assert decode(bits, t) == v

    def test_wide_struct_roundtrips(self):
        t = parse_type("struct{lo:uint4096,hi:sint4096}")
        v = {"lo": 12345 << 4000, "hi": -(1 << 4095)}
        assert decode(encode(v, t), t) == v


class TestBitStringAccess:
    def test_window_reads_past_end_as_zero(self):
        b = bits_of(0b101, 3)
        assert b.window(1, 8).to_int() == 0b10
        assert b.window(64, 4).to_int() == 0

    def test_slice_bounds_enforced(self):
        b = bits_of(0xFF, 8)
        with pytest.raises(BitLengthError):
            b.slice(4, 5)
        with pytest.raises(BitLengthError):
            b.bit(8)
        assert b.slice(4, 4).to_int() == 0xF


class TestDigest:
    def test_distinguishes_lengths(self):
        a = bits_of(0, 7)
        b = bits_of(0, 8)
        assert a.to_bytes() == b.to_bytes()
        assert wire.digest64(a) != wire.digest64(b)

    def test_deterministic(self):
        b = bits_of(0xABCDE, 20)
        assert wire.digest64(b) == wire.digest64(bits_of(0xABCDE, 20))


class TestValidate:
    def test_list_values(self):
        t = ListType(UIntType(8))
        validate([1, 2, 3], t)
        with pytest.raises(ShapeMismatchError):
            validate("nope", t)
        with pytest.raises(ValueRangeError):
            validate([256], t)
