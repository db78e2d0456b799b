"""Type system: widths, equality, canonical text, identifiers."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esic.errors import (
    EsiTypeError,
    NestedListError,
    TypeSyntaxError,
    VariableSizeError,
)
from esic.random_data import random_fixed_type, random_type
from esic.types import (
    ArrayType,
    EnumType,
    ListType,
    SIntType,
    StructType,
    UIntType,
    UnionType,
    bit_width,
    parse_type,
    print_type,
    type_equal,
    type_id,
)


def ref_fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class TestBitWidth:
    def test_declared_widths(self):
        assert bit_width(UIntType(7)) == 7
        assert bit_width(SIntType(13)) == 13

    def test_struct_sums_fields(self):
        t = StructType((("a", UIntType(4)), ("b", UIntType(4))))
        assert bit_width(t) == 8

    def test_enum_needs_ceil_log2(self):
        assert bit_width(EnumType(tuple("ABCDE"))) == 3
        assert bit_width(EnumType(("only",))) == 1
        assert bit_width(EnumType(("a", "b"))) == 1
        assert bit_width(EnumType(tuple(f"v{i}" for i in range(8)))) == 3
        assert bit_width(EnumType(tuple(f"v{i}" for i in range(9)))) == 4

    def test_union_tag_plus_widest(self):
        t = UnionType((("a", UIntType(3)), ("b", UIntType(9))))
        assert bit_width(t) == 10

    def test_array_multiplies(self):
        assert bit_width(ArrayType(UIntType(4), 3)) == 12

    def test_list_has_no_width(self):
        with pytest.raises(VariableSizeError):
            bit_width(ListType(UIntType(8)))


class TestEquality:
    def test_same_scalar(self):
        assert type_equal(UIntType(8), UIntType(8))
        assert not type_equal(UIntType(8), UIntType(9))
        assert not type_equal(UIntType(8), SIntType(8))

    def test_field_names_matter(self):
        a = StructType((("a", UIntType(8)),))
        b = StructType((("b", UIntType(8)),))
        assert not type_equal(a, b)

    def test_arrays(self):
        assert type_equal(ArrayType(UIntType(4), 3), ArrayType(UIntType(4), 3))
        assert not type_equal(ArrayType(UIntType(4), 3), ArrayType(UIntType(4), 4))

    def test_order_matters(self):
        a = StructType((("x", UIntType(1)), ("y", UIntType(2))))
        b = StructType((("y", UIntType(2)), ("x", UIntType(1))))
        assert not type_equal(a, b)

    def test_equivalence_relation_on_random_triples(self):
        rng = random.Random(7)
        pool = [random_fixed_type(rng, 3, 16) for _ in range(40)]
        for _ in range(200):
            a, b, c = rng.choice(pool), rng.choice(pool), rng.choice(pool)
            assert type_equal(a, a)
            assert type_equal(a, b) == type_equal(b, a)
            if type_equal(a, b) and type_equal(b, c):
                assert type_equal(a, c)


class TestParsePrint:
    @pytest.mark.parametrize(
        "text,expect",
        [
            ("uint8", UIntType(8)),
            ("sint12", SIntType(12)),
            ("enum{A,B,C}", EnumType(("A", "B", "C"))),
            ("array<uint4,3>", ArrayType(UIntType(4), 3)),
            (
                "struct{a:uint4,b:uint4}",
                StructType((("a", UIntType(4)), ("b", UIntType(4)))),
            ),
            (
                "union{ok:uint8,err:sint16}",
                UnionType((("ok", UIntType(8)), ("err", SIntType(16)))),
            ),
            ("list<uint8>", ListType(UIntType(8))),
        ],
    )
    def test_examples(self, text, expect):
        assert parse_type(text) == expect
        assert print_type(expect) == text

    def test_whitespace_tolerated_not_printed(self):
        t = parse_type(" struct { a : uint4 , b : array< sint2 , 7 > } ")
        assert print_type(t) == "struct{a:uint4,b:array<sint2,7>}"

    def test_nested_list_rejected(self):
        with pytest.raises(NestedListError):
            parse_type("list<list<uint8>>")
        with pytest.raises(NestedListError):
            parse_type("struct{a:list<uint8>}")
        with pytest.raises(NestedListError):
            parse_type("array<list<uint8>,2>")

    @pytest.mark.parametrize(
        "bad",
        ["", "uint", "uint0", "uint4097", "float32", "struct{}", "enum{}",
         "struct{a:uint4", "array<uint8>", "uint8 trailing", "struct{a:uint4,a:uint4}"],
    )
    def test_syntax_errors(self, bad):
        with pytest.raises(TypeSyntaxError):
            parse_type(bad)

    def test_error_carries_position(self):
        try:
            parse_type("struct{a:wat}")
        except TypeSyntaxError as exc:
            assert exc.position == 9
        else:
            pytest.fail("expected a syntax error")

    def test_roundtrip_random_types(self):
        rng = random.Random(1234)
        for _ in range(500):
            t = random_type(rng, max_depth=5, max_width=64)
            assert parse_type(print_type(t)) == t

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_roundtrip_property(self, seed):
        t = random_type(random.Random(seed), max_depth=5, max_width=64)
        parsed = parse_type(print_type(t))
        assert type_equal(parsed, t)
        assert print_type(parsed) == print_type(t)


class TestConstruction:
    def test_width_bounds(self):
        with pytest.raises(EsiTypeError):
            UIntType(0)
        with pytest.raises(EsiTypeError):
            SIntType(4097)
        UIntType(4096)  # cap itself is legal

    def test_duplicate_names_rejected(self):
        with pytest.raises(EsiTypeError):
            EnumType(("A", "A"))
        with pytest.raises(EsiTypeError):
            StructType((("a", UIntType(1)), ("a", UIntType(2))))

    def test_empty_aggregates_rejected(self):
        with pytest.raises(EsiTypeError):
            StructType(())
        with pytest.raises(EsiTypeError):
            UnionType(())
        with pytest.raises(EsiTypeError):
            ArrayType(UIntType(8), 0)

    def test_nested_list_rejected_in_constructors(self):
        with pytest.raises(NestedListError):
            ListType(ListType(UIntType(8)))
        with pytest.raises(NestedListError):
            UnionType((("v", ListType(UIntType(8))),))


class TestTypeId:
    def test_deterministic(self):
        t = parse_type("struct{a:uint4,b:uint4}")
        assert type_id(t) == type_id(parse_type("struct{a:uint4,b:uint4}"))

    def test_equal_types_equal_ids(self):
        rng = random.Random(99)
        for _ in range(100):
            t = random_type(rng, 4, 32)
            u = parse_type(print_type(t))
            assert type_equal(t, u) and type_id(t) == type_id(u)

    def test_uint8_vs_uint9_differ(self):
        # independently computed FNV-1a of both canonical forms
        a, b = ref_fnv1a64(b"uint8"), ref_fnv1a64(b"uint9")
        assert a != b
        assert type_id(UIntType(8)) == a
        assert type_id(UIntType(9)) == b
