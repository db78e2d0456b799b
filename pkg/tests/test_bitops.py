"""Kernel semantics against a naive per-bit reference, and backend parity."""

import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esic import _bitops_py

try:
    from esic import _bitops as _bitops_c
except ImportError:
    _bitops_c = None

BACKENDS = [_bitops_py] + ([_bitops_c] if _bitops_c else [])


def ref_bits(data: bytes) -> list[int]:
    return [(data[i >> 3] >> (i & 7)) & 1 for i in range(8 * len(data))]


def ref_pack(bits: list[int]) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        out[i >> 3] |= b << (i & 7)
    return bytes(out)


def ref_fnv1a64(data: bytes, h: int = 0xCBF29CE484222325) -> int:
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.BACKEND)
class TestKernels:
    @given(data=st.binary(max_size=40), off=st.integers(0, 200), n=st.integers(0, 200))
    @settings(max_examples=300, deadline=None)
    def test_extract_matches_reference(self, impl, data, off, n):
        got = impl.extract_bits(data, off, n)
        src = ref_bits(data)
        want = [(src[off + i] if off + i < len(src) else 0) for i in range(n)]
        assert got == ref_pack(want)

    @given(
        dst_size=st.integers(0, 48),
        off=st.integers(0, 200),
        data=st.binary(max_size=24),
        n=st.integers(0, 160),
    )
    @settings(max_examples=300, deadline=None)
    def test_deposit_matches_reference(self, impl, dst_size, off, data, n):
        n = min(n, 8 * len(data))
        size = max(dst_size, (off + n + 7) // 8)
        buf = bytearray(size)
        impl.deposit_bits(buf, off, data, n)
        want = [0] * (8 * size)
        src = ref_bits(data)
        for i in range(n):
            want[off + i] = src[i]
        assert bytes(buf) == ref_pack(want)

    @given(data=st.binary(max_size=40), off=st.integers(0, 200), n=st.integers(0, 200))
    @settings(max_examples=300, deadline=None)
    def test_any_bit_set_matches_reference(self, impl, data, off, n):
        src = ref_bits(data)
        want = any(src[off + i] for i in range(n) if off + i < len(src))
        assert impl.any_bit_set(data, off, n) == want

    @given(data=st.binary(max_size=64))
    @settings(max_examples=200, deadline=None)
    def test_fnv_matches_reference(self, impl, data):
        assert impl.fnv1a64(data) == ref_fnv1a64(data)

    def test_fnv_known_vectors(self, impl):
        # published FNV-1a 64-bit vectors
        assert impl.fnv1a64(b"") == 0xCBF29CE484222325
        assert impl.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert impl.fnv1a64(b"foobar") == 0x85944171F73967E8

    def test_fnv_chains(self, impl):
        whole = impl.fnv1a64(b"split point")
        assert impl.fnv1a64(b" point", impl.fnv1a64(b"split")) == whole


def test_env_var_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "import esic.bitops; print(esic.bitops.BACKEND)"],
        env={**os.environ, "ESIC_PURE_PYTHON": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.skipif(_bitops_c is None, reason="compiled kernels not built")
@given(
    data=st.binary(max_size=48),
    off=st.integers(0, 300),
    n=st.integers(0, 300),
)
@settings(max_examples=300, deadline=None)
def test_backend_parity(data, off, n):
    assert _bitops_c.extract_bits(data, off, n) == _bitops_py.extract_bits(data, off, n)
    assert _bitops_c.any_bit_set(data, off, n) == _bitops_py.any_bit_set(data, off, n)
    size = (off + n + 7) // 8 + 2
    b1, b2 = bytearray(size), bytearray(size)
    m = min(n, 8 * len(data))
    _bitops_c.deposit_bits(b1, off, data, m)
    _bitops_py.deposit_bits(b2, off, data, m)
    assert b1 == b2
    assert _bitops_c.fnv1a64(data) == _bitops_py.fnv1a64(data)
