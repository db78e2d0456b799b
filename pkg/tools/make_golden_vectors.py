#!/usr/bin/env python3
"""Regenerate the shared encode/decode golden corpus.

Each JSON line is {"type": canonical text, "value": message value,
"bytes": hex byte serialization}. The corpus pins the bit-level encoding
so independent client implementations can prove byte parity. Output is
deterministic; regenerating must produce an identical file.

Usage: python tools/make_golden_vectors.py [--out golden/vectors.jsonl]
"""

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from esic import wire  # noqa: E402
from esic.random_data import random_type, random_value  # noqa: E402
from esic.types import ListType, parse_type, print_type  # noqa: E402

HAND_PICKED = [
    ("uint1", 1),
    ("uint8", 0),
    ("uint8", 255),
    ("uint64", (1 << 64) - 1),
    ("uint13", 0x1ABC),
    ("sint8", -128),
    ("sint8", 127),
    ("sint1", -1),
    ("sint40", -(1 << 39)),
    ("enum{A}", 0),
    ("enum{A,B,C,D,E}", 2),
    ("enum{A,B,C,D,E}", 4),
    ("array<uint4,3>", [1, 2, 3]),
    ("array<sint2,4>", [-2, -1, 0, 1]),
    ("struct{a:uint4,b:uint4}", {"a": 3, "b": 10}),
    ("struct{x:uint1,y:uint16,z:sint3}", {"x": 1, "y": 0xBEEF, "z": -4}),
    ("union{a:uint3,b:uint9}", [0, 5]),
    ("union{a:uint3,b:uint9}", [1, 511]),
    ("union{one:uint7}", [0, 99]),
    ("struct{head:enum{GO,STOP},tail:array<uint8,2>}", {"head": 1, "tail": [7, 9]}),
    ("list<uint8>", []),
    ("list<uint8>", [1, 2, 3, 4, 5]),
    ("list<uint1>", [1, 0, 1, 1]),
    ("list<struct{a:uint4,b:uint4}>", [{"a": 1, "b": 2}, {"a": 15, "b": 0}]),
    ("list<union{s:uint2,w:uint20}>", [[0, 3], [1, 0xFFFFF]]),
]

RANDOM_COUNT = 500


def vectors():
    for text, value in HAND_PICKED:
        yield text, value
    rng = random.Random(0x601D)
    for _ in range(RANDOM_COUNT):
        t = random_type(rng, max_depth=4, max_width=64, list_probability=0.3)
        yield print_type(t), random_value(rng, t, max_list_len=10)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "golden" / "vectors.jsonl"),
    )
    args = parser.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for text, value in vectors():
        t = parse_type(text)
        bits = wire.encode_message(value, t)
        lines.append(
            json.dumps(
                {"type": text, "value": value, "bytes": bits.to_bytes().hex()},
                sort_keys=True,
            )
        )
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} vectors to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
