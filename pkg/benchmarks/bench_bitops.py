#!/usr/bin/env python3
"""Benchmark the compiled bit kernels against the pure-Python fallback.

The kernels sit under every hot path: message encode/decode, gearbox
split/join, streaming repack, payload digests, and therefore the
simulator's per-beat work. Both backends are loaded into one process and
swapped on the esic.bitops facade between runs.

Usage: python benchmarks/bench_bitops.py [--repeat 5] [--scale 1.0]
"""

import argparse
import json
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from esic import _bitops_py, bitops  # noqa: E402

try:
    from esic import _bitops as _bitops_c
except ImportError:
    _bitops_c = None

from esic import fabric, sim, system, wire  # noqa: E402
from esic.random_data import random_fixed_type, random_value  # noqa: E402
from esic.types import UIntType, parse_type  # noqa: E402

_FACADE = ("extract_bits", "deposit_bits", "any_bit_set", "fnv1a64")


def use_backend(mod) -> None:
    for name in _FACADE:
        setattr(bitops, name, getattr(mod, name))


def bench_encode_decode(n):
    rng = random.Random(1)
    pairs = []
    for _ in range(64):
        t = random_fixed_type(rng, 4, 64)
        pairs.append((t, random_value(rng, t)))
    count = 0
    for i in range(n):
        t, v = pairs[i % len(pairs)]
        wire.decode(wire.encode(v, t), t)
        count += 1
    return count


def bench_gearbox(n):
    rng = random.Random(2)
    msgs = [
        wire.BitString.from_int(rng.getrandbits(4096), 4096) for _ in range(8)
    ]
    count = 0
    for i in range(n):
        bits = msgs[i % len(msgs)]
        beats = wire.gearbox_split(bits, 16)
        wire.gearbox_join(beats, len(bits))
        count += 1
    return count


def bench_repack(n):
    rng = random.Random(3)
    elem = UIntType(8)
    frames = [
        wire.gearbox_split(
            wire.frame_list([rng.getrandbits(8) for _ in range(1000)], elem), 16
        )
        for _ in range(4)
    ]
    count = 0
    for i in range(n):
        wire.repack(frames[i % len(frames)], elem, 16, 24)
        count += 1
    return count


def bench_digest(n):
    rng = random.Random(4)
    msgs = [wire.BitString.from_int(rng.getrandbits(8192), 8192) for _ in range(8)]
    count = 0
    for i in range(n):
        wire.digest64(msgs[i % len(msgs)])
        count += 1
    return count


def bench_sim_ticks(n):
    design = {
        "name": "bench",
        "clocks": [{"name": "main", "period": 1}],
        "modules": [
            {"name": "Gen", "behavior": "source",
             "ports": [{"name": "out", "dir": "out", "type": "list<uint8>",
                        "chunk_size": 2}]},
            {"name": "Eat", "behavior": "sink",
             "ports": [{"name": "in", "dir": "in", "type": "list<uint8>",
                        "chunk_size": 3}]},
        ],
        "instances": [
            {"name": "gen0", "module": "Gen", "clock": "main"},
            {"name": "eat0", "module": "Eat", "clock": "main"},
        ],
        "connections": [
            {"from": "gen0.out", "to": "eat0.in", "buffer_stages": 4,
             "monitored": True}
        ],
    }
    graph = fabric.elaborate(system.parse_system(json.dumps(design)))
    engine = sim.Engine(
        graph, sim.SimConfig(seed=1, max_ticks=n, stall_prob=0.2)
    )
    engine.step(n)
    return n


WORKLOADS = [
    ("encode+decode msgs", bench_encode_decode, 20_000),
    ("gearbox 4096b @16", bench_gearbox, 2_000),
    ("repack 1000-elem list", bench_repack, 200),
    ("digest 8192b", bench_digest, 50_000),
    ("sim ticks (list pipe)", bench_sim_ticks, 20_000),
]


def run(mod, repeat, scale):
    rows = {}
    for name, fn, base_n in WORKLOADS:
        n = max(1, int(base_n * scale))
        best = float("inf")
        for _ in range(repeat):
            use_backend(mod)
            t0 = time.perf_counter()
            count = fn(n)
            dt = time.perf_counter() - t0
            best = min(best, dt / count)
        rows[name] = 1.0 / best
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--scale", type=float, default=1.0,
                        help="scale iteration counts")
    args = parser.parse_args()

    backends = [("python", _bitops_py)]
    if _bitops_c is not None:
        backends.append(("cython", _bitops_c))
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    results = {name: run(mod, args.repeat, args.scale) for name, mod in backends}

    width = max(len(n) for n, _, _ in WORKLOADS)
    header = f"{'workload':<{width}}  " + "".join(
        f"{name + ' ops/s':>16}" for name, _ in backends
    )
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, _, _ in WORKLOADS:
        row = f"{name:<{width}}  "
        for bname, _ in backends:
            row += f"{results[bname][name]:>16,.0f}"
        if len(backends) == 2:
            speedup = results["cython"][name] / results["python"][name]
            row += f"{speedup:>9.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
