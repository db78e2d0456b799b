"""Message type system: values, canonical text form, widths, identifiers.

Seven constructors: unsigned/signed integers of arbitrary width, enums,
fixed arrays, structs, tagged unions, and variable-length lists. Lists may
only appear as the outermost type of a channel; everything else is
fixed-size with a computable bit width.

Canonical grammar (whitespace-free when printed; parser accepts any
whitespace between tokens):

    uintN  sintN  enum{A,B,...}  array<T,N>  struct{name:T,...}
    union{name:T,...}  list<T>
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from . import bitops
from .errors import EsiTypeError, NestedListError, TypeSyntaxError, VariableSizeError

# Widths above this are rejected; bounds memory use in randomized tests.
MAX_SCALAR_WIDTH = 4096

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _check_width(width: int) -> None:
    if not isinstance(width, int) or not 1 <= width <= MAX_SCALAR_WIDTH:
        raise EsiTypeError(f"width {width!r} outside 1..{MAX_SCALAR_WIDTH}")


def _check_names(names, what: str) -> None:
    if len(names) == 0:
        raise EsiTypeError(f"{what} must declare at least one member")
    seen = set()
    for n in names:
        if not isinstance(n, str) or not _NAME_RE.fullmatch(n):
            raise EsiTypeError(f"invalid {what} member name {n!r}")
        if n in seen:
            raise EsiTypeError(f"duplicate {what} member name {n!r}")
        seen.add(n)


def _check_fixed_child(t: EsiType, where: str) -> None:
    if not isinstance(t, _TYPE_CLASSES):
        raise EsiTypeError(f"{where} is not a type: {t!r}")
    if isinstance(t, ListType):
        raise NestedListError(f"list type not allowed inside {where}")


@dataclass(frozen=True)
class UIntType:
    width: int

    def __post_init__(self):
        _check_width(self.width)


@dataclass(frozen=True)
class SIntType:
    """Two's-complement signed integer."""

    width: int

    def __post_init__(self):
        _check_width(self.width)


@dataclass(frozen=True)
class EnumType:
    variants: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        _check_names(self.variants, "enum")


@dataclass(frozen=True)
class ArrayType:
    element: EsiType
    length: int

    def __post_init__(self):
        _check_fixed_child(self.element, "array element")
        if not isinstance(self.length, int) or self.length < 1:
            raise EsiTypeError(f"array length {self.length!r} must be >= 1")


@dataclass(frozen=True)
class StructType:
    fields: tuple[tuple[str, EsiType], ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple((n, t) for n, t in self.fields))
        _check_names([n for n, _ in self.fields], "struct")
        for name, t in self.fields:
            _check_fixed_child(t, f"struct field {name!r}")


@dataclass(frozen=True)
class UnionType:
    variants: tuple[tuple[str, EsiType], ...]

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple((n, t) for n, t in self.variants))
        _check_names([n for n, _ in self.variants], "union")
        for name, t in self.variants:
            _check_fixed_child(t, f"union variant {name!r}")


@dataclass(frozen=True)
class ListType:
    """Variable-length sequence; legal only as a channel's outermost type."""

    element: EsiType

    def __post_init__(self):
        _check_fixed_child(self.element, "list element")


EsiType = Union[UIntType, SIntType, EnumType, ArrayType, StructType, UnionType, ListType]

_TYPE_CLASSES = (UIntType, SIntType, EnumType, ArrayType, StructType, UnionType, ListType)


def is_fixed_size(t: EsiType) -> bool:
    """A type is fixed-size iff it contains no list (lists never nest)."""
    return not isinstance(t, ListType)


def tag_width(n_variants: int) -> int:
    """Bits needed to number n variants; at least one."""
    return max(1, (n_variants - 1).bit_length())


def bit_width(t: EsiType) -> int:
    """Exact encoded width in bits of a fixed-size type."""
    if isinstance(t, (UIntType, SIntType)):
        return t.width
    if isinstance(t, EnumType):
        return tag_width(len(t.variants))
    if isinstance(t, ArrayType):
        return t.length * bit_width(t.element)
    if isinstance(t, StructType):
        return sum(bit_width(ft) for _, ft in t.fields)
    if isinstance(t, UnionType):
        return tag_width(len(t.variants)) + max(bit_width(vt) for _, vt in t.variants)
    if isinstance(t, ListType):
        raise VariableSizeError("list types have no fixed bit width")
    raise EsiTypeError(f"not a type: {t!r}")


def type_equal(a: EsiType, b: EsiType) -> bool:
    """Structural equality, including member names and order."""
    return a == b


def print_type(t: EsiType) -> str:
    """Emit the single canonical textual form (no whitespace)."""
    if isinstance(t, UIntType):
        return f"uint{t.width}"
    if isinstance(t, SIntType):
        return f"sint{t.width}"
    if isinstance(t, EnumType):
        return "enum{" + ",".join(t.variants) + "}"
    if isinstance(t, ArrayType):
        return f"array<{print_type(t.element)},{t.length}>"
    if isinstance(t, StructType):
        return "struct{" + ",".join(f"{n}:{print_type(ft)}" for n, ft in t.fields) + "}"
    if isinstance(t, UnionType):
        return "union{" + ",".join(f"{n}:{print_type(vt)}" for n, vt in t.variants) + "}"
    if isinstance(t, ListType):
        return f"list<{print_type(t.element)}>"
    raise EsiTypeError(f"not a type: {t!r}")


def type_id(t: EsiType) -> int:
    """Stable 64-bit identifier: FNV-1a of the canonical text."""
    return bitops.fnv1a64(print_type(t).encode("ascii"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> TypeSyntaxError:
        return TypeSyntaxError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def name(self) -> str:
        self.skip_ws()
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected a name")
        self.pos = m.end()
        return m.group()

    def number(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected a number")
        return int(self.text[start : self.pos])

    def type_expr(self) -> EsiType:
        self.skip_ws()
        start = self.pos
        word = self.name()
        try:
            if word.startswith("uint") and word[4:].isdigit():
                return UIntType(int(word[4:]))
            if word.startswith("sint") and word[4:].isdigit():
                return SIntType(int(word[4:]))
            if word == "enum":
                self.expect("{")
                variants = [self.name()]
                self.skip_ws()
                while self.peek() == ",":
                    self.pos += 1
                    variants.append(self.name())
                    self.skip_ws()
                self.expect("}")
                return EnumType(tuple(variants))
            if word == "array":
                self.expect("<")
                elem = self.type_expr()
                self.expect(",")
                length = self.number()
                self.expect(">")
                return ArrayType(elem, length)
            if word == "struct" or word == "union":
                self.expect("{")
                members = [self.member()]
                self.skip_ws()
                while self.peek() == ",":
                    self.pos += 1
                    members.append(self.member())
                    self.skip_ws()
                self.expect("}")
                if word == "struct":
                    return StructType(tuple(members))
                return UnionType(tuple(members))
            if word == "list":
                self.expect("<")
                elem = self.type_expr()
                self.expect(">")
                return ListType(elem)
        except NestedListError:
            raise
        except EsiTypeError as exc:
            self.pos = start
            raise self.error(str(exc)) from exc
        self.pos = start
        raise self.error(f"unknown type keyword {word!r}")

    def member(self) -> tuple[str, EsiType]:
        field = self.name()
        self.expect(":")
        return field, self.type_expr()


def parse_type(text: str) -> EsiType:
    """Parse type text; inverse of print_type.

    Raises TypeSyntaxError (with offset) on grammar violations and
    NestedListError when a list appears in a non-outermost position.
    """
    p = _Parser(text)
    t = p.type_expr()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing characters after type")
    return t
