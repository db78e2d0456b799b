"""Seeded generators for random types and values.

Shared by the default simulation sources, the golden-vector tool, and the
randomized test suites. All randomness flows through a caller-supplied
random.Random, so streams are reproducible from an integer seed.
"""

from __future__ import annotations

import random

from . import bitops
from .types import (
    ArrayType,
    EnumType,
    EsiType,
    ListType,
    SIntType,
    StructType,
    UIntType,
    UnionType,
)

_LEAF_KINDS = ("uint", "sint", "enum")
_ALL_KINDS = _LEAF_KINDS + ("array", "struct", "union")


def seeded_rng(seed: int, *labels: str) -> random.Random:
    """A Random whose stream depends only on the seed and labels."""
    h = bitops.fnv1a64(repr(seed).encode())
    for label in labels:
        h = bitops.fnv1a64(label.encode(), h)
    return random.Random(h)


def random_fixed_type(
    rng: random.Random, max_depth: int = 3, max_width: int = 64
) -> EsiType:
    kind = rng.choice(_ALL_KINDS if max_depth > 0 else _LEAF_KINDS)
    if kind == "uint":
        return UIntType(rng.randint(1, max_width))
    if kind == "sint":
        return SIntType(rng.randint(1, max_width))
    if kind == "enum":
        return EnumType(tuple(f"V{i}" for i in range(rng.randint(1, 9))))
    if kind == "array":
        return ArrayType(
            random_fixed_type(rng, max_depth - 1, max_width), rng.randint(1, 4)
        )
    if kind == "struct":
        return StructType(
            tuple(
                (f"f{i}", random_fixed_type(rng, max_depth - 1, max_width))
                for i in range(rng.randint(1, 4))
            )
        )
    return UnionType(
        tuple(
            (f"v{i}", random_fixed_type(rng, max_depth - 1, max_width))
            for i in range(rng.randint(1, 4))
        )
    )


def random_type(
    rng: random.Random,
    max_depth: int = 3,
    max_width: int = 64,
    list_probability: float = 0.25,
) -> EsiType:
    """Random channel type; lists appear only at the outermost position."""
    if rng.random() < list_probability:
        return ListType(random_fixed_type(rng, max_depth - 1, max_width))
    return random_fixed_type(rng, max_depth, max_width)


def random_value(rng: random.Random, t: EsiType, max_list_len: int = 8):
    if isinstance(t, UIntType):
        return rng.getrandbits(t.width)
    if isinstance(t, SIntType):
        raw = rng.getrandbits(t.width)
        return raw - (1 << t.width) if raw >> (t.width - 1) else raw
    if isinstance(t, EnumType):
        return rng.randrange(len(t.variants))
    if isinstance(t, ArrayType):
        return [random_value(rng, t.element, max_list_len) for _ in range(t.length)]
    if isinstance(t, StructType):
        return {n: random_value(rng, ft, max_list_len) for n, ft in t.fields}
    if isinstance(t, UnionType):
        tag = rng.randrange(len(t.variants))
        return [tag, random_value(rng, t.variants[tag][1], max_list_len)]
    if isinstance(t, ListType):
        n = rng.randint(0, max_list_len)
        return [random_value(rng, t.element, max_list_len) for _ in range(n)]
    raise TypeError(f"not a type: {t!r}")
