"""The checked-in corpus stays true to the codec and regenerates identically."""

import json
import subprocess
import sys

from _support import GOLDEN, REPO
from esic import wire
from esic.types import parse_type


def load_vectors():
    lines = (GOLDEN / "vectors.jsonl").read_text().splitlines()
    return [json.loads(line) for line in lines]


def test_corpus_is_large_enough():
    assert len(load_vectors()) >= 500


def test_every_vector_encodes_and_decodes():
    for vec in load_vectors():
        t = parse_type(vec["type"])
        bits = wire.encode_message(vec["value"], t)
        assert bits.to_bytes().hex() == vec["bytes"], vec["type"]
        assert wire.decode_message(bits, t) == vec["value"], vec["type"]


def test_generator_reproduces_the_checked_in_file(tmp_path):
    out = tmp_path / "regen.jsonl"
    subprocess.run(
        [sys.executable, str(REPO / "tools" / "make_golden_vectors.py"),
         "--out", str(out)],
        check=True,
        capture_output=True,
    )
    assert out.read_bytes() == (GOLDEN / "vectors.jsonl").read_bytes()
