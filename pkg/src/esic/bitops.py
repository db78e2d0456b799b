"""Bit-kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python kernels.
Set ESIC_PURE_PYTHON=1 to force the fallback (used by the benchmark and
by backend-parity tests).
"""

from __future__ import annotations

import os

from ._bitops_py import FNV64_OFFSET, FNV64_PRIME

if os.environ.get("ESIC_PURE_PYTHON"):
    from . import _bitops_py as _impl
else:
    try:
        from . import _bitops as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _bitops_py as _impl

BACKEND: str = _impl.BACKEND
extract_bits = _impl.extract_bits
deposit_bits = _impl.deposit_bits
any_bit_set = _impl.any_bit_set
fnv1a64 = _impl.fnv1a64

__all__ = [
    "BACKEND",
    "FNV64_OFFSET",
    "FNV64_PRIME",
    "extract_bits",
    "deposit_bits",
    "any_bit_set",
    "fnv1a64",
]
