"""Message type descriptors parsed from manifest type strings.

Grammar: uintN, sintN, enum{A,B}, array<T,N>, struct{name:T,...},
union{name:T,...}, list<T> (lists only at the outermost position).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import TypeTextError

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|\d+|[{}<>,:])")


@dataclass(frozen=True)
class TypeDesc:
    kind: str  # uint | sint | enum | array | struct | union | list
    width: int = 0  # uint/sint
    members: tuple = ()  # enum names, (name, TypeDesc) pairs, or (elem,)
    length: int = 0  # array


def _tag_bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def bit_width(t: TypeDesc) -> int:
    if t.kind in ("uint", "sint"):
        return t.width
    if t.kind == "enum":
        return _tag_bits(len(t.members))
    if t.kind == "array":
        return t.length * bit_width(t.members[0])
    if t.kind == "struct":
        return sum(bit_width(ft) for _, ft in t.members)
    if t.kind == "union":
        return _tag_bits(len(t.members)) + max(bit_width(ft) for _, ft in t.members)
    raise TypeTextError("list types have no fixed width")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def next(self) -> str:
        m = _TOKEN.match(self.text, self.pos)
        if not m:
            raise TypeTextError(f"bad type text near offset {self.pos}")
        self.pos = m.end()
        return m.group(1)

    def expect(self, want: str) -> None:
        got = self.next()
        if got != want:
            raise TypeTextError(f"expected {want!r}, got {got!r}")

    def done(self) -> bool:
        return not _TOKEN.match(self.text, self.pos)


def parse_type(text: str) -> TypeDesc:
    toks = _Tokens(text)
    desc = _parse(toks, outermost=True)
    if not toks.done():
        raise TypeTextError("trailing characters in type text")
    return desc


def _parse(toks: _Tokens, outermost: bool = False) -> TypeDesc:
    head = toks.next()
    m = re.fullmatch(r"(uint|sint)(\d+)", head)
    if m:
        width = int(m.group(2))
        if not 1 <= width <= 4096:
            raise TypeTextError(f"width {width} out of range")
        return TypeDesc(m.group(1), width=width)
    if head == "enum":
        toks.expect("{")
        names = [toks.next()]
        while (tok := toks.next()) == ",":
            names.append(toks.next())
        if tok != "}":
            raise TypeTextError("expected '}' after enum members")
        return TypeDesc("enum", members=tuple(names))
    if head == "array":
        toks.expect("<")
        elem = _parse(toks)
        toks.expect(",")
        length = int(toks.next())
        toks.expect(">")
        if length < 1:
            raise TypeTextError("array length must be >= 1")
        return TypeDesc("array", members=(elem,), length=length)
    if head in ("struct", "union"):
        toks.expect("{")
        fields = []
        while True:
            name = toks.next()
            toks.expect(":")
            fields.append((name, _parse(toks)))
            tok = toks.next()
            if tok == "}":
                break
            if tok != ",":
                raise TypeTextError(f"expected ',' or '}}', got {tok!r}")
        return TypeDesc(head, members=tuple(fields))
    if head == "list":
        if not outermost:
            raise TypeTextError("list types may only appear outermost")
        toks.expect("<")
        elem = _parse(toks)
        toks.expect(">")
        return TypeDesc("list", members=(elem,))
    raise TypeTextError(f"unknown type keyword {head!r}")


def type_id(text: str) -> int:
    """64-bit FNV-1a of the canonical type text, as the server computes it."""
    h = 0xCBF29CE484222325
    for b in text.encode("ascii"):
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h
