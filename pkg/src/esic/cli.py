"""Command-line entry point.

Subcommands: check, elaborate, sim, serve, schema. Exit status is stable:
0 success, 1 diagnostics or input errors, 2 usage errors, 3 runtime
failures (I/O, network). ESIC_LOG=error|warn|info|debug sets log
verbosity on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import cosim, fabric, sim, system
from .errors import DiagnosticsError, EsiError, UncheckedDesignError

log = logging.getLogger("esic")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("ESIC_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="esic: %(message)s")


def _print_diagnostics(diags) -> None:
    for d in diags:
        print(d.render(), file=sys.stderr)


def _load_checked(path: str):
    """Parse and check a design file; returns (desc, graph) or exits 1/3."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"esic: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(3)
    try:
        desc = system.parse_system(text, filename=path)
    except DiagnosticsError as exc:
        _print_diagnostics(exc.diagnostics)
        raise SystemExit(1)
    diags = system.check(desc, filename=path)
    if diags:
        _print_diagnostics(diags)
        raise SystemExit(1)
    return desc, fabric.elaborate(desc)


def _write_or_fail(path: str, data: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(data)
    except OSError as exc:
        print(f"esic: cannot write {path}: {exc}", file=sys.stderr)
        raise SystemExit(3)


def cmd_check(args) -> int:
    _load_checked(args.file)
    return 0


def cmd_elaborate(args) -> int:
    _, graph = _load_checked(args.file)
    if args.dot:
        _write_or_fail(args.dot, fabric.emit_dot(graph))
    if args.out:
        _write_or_fail(
            args.out, json.dumps(fabric.graph_to_json(graph), sort_keys=True) + "\n"
        )
    if args.stats:
        print(json.dumps(fabric.fabric_stats(graph), sort_keys=True))
    return 0


def cmd_sim(args) -> int:
    _, graph = _load_checked(args.file)
    try:
        config = sim.SimConfig(
            seed=args.seed,
            max_ticks=args.ticks,
            stall_prob=args.stall,
            monitor_latency=True,
        )
    except ValueError as exc:
        print(f"esic: {exc}", file=sys.stderr)
        return 2
    result = sim.run(graph, config)
    report = sim.monitor_report(result, graph)
    if args.report == "json":
        print(json.dumps(report, sort_keys=True))
    else:
        print(sim.render_report_text(report), end="")
    if args.trace:
        lines = []
        for ev in result.trace:
            lines.append(
                json.dumps(
                    {
                        "tick": ev.tick,
                        "edge": ev.edge,
                        "ordinal": ev.ordinal,
                        "digest": f"0x{ev.digest:016x}",
                        "beats": ev.beats,
                        "emit_tick": ev.emit_tick,
                    },
                    sort_keys=True,
                )
            )
        _write_or_fail(args.trace, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def cmd_serve(args) -> int:
    _, graph = _load_checked(args.file)
    try:
        server = cosim.CosimServer(
            graph, port=args.port, ticks_per_iter=args.ticks_per_iter
        )
    except OSError as exc:
        print(f"esic: cannot listen on port {args.port}: {exc}", file=sys.stderr)
        return 3
    host, port = server.address
    print(f"serving {graph.name} on {host}:{port}", flush=True)
    log.info("serving %s on %s:%d", graph.name, host, port)
    try:
        server.serve()
    except KeyboardInterrupt:
        pass
    except OSError as exc:
        print(f"esic: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_schema(args) -> int:
    _, graph = _load_checked(args.file)
    doc = cosim.manifest_to_json(cosim.manifest(graph))
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.json:
        _write_or_fail(args.json, text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esic",
        description="elastic interconnect toolchain: check, lower, simulate, "
        "and serve declarative hardware-system descriptions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="type-check a system description")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("elaborate", help="lower a description to a fabric graph")
    p.add_argument("file")
    p.add_argument("--dot", metavar="PATH", help="write a Graphviz rendering")
    p.add_argument("--stats", action="store_true", help="print node/edge statistics")
    p.add_argument("--out", metavar="PATH", help="write the fabric graph as JSON")
    p.set_defaults(fn=cmd_elaborate)

    p = sub.add_parser("sim", help="simulate the elaborated fabric")
    p.add_argument("file")
    p.add_argument("--ticks", type=int, default=1000, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--stall", type=float, default=0.0, metavar="P")
    p.add_argument("--report", choices=["json", "text"], default="text")
    p.add_argument("--trace", metavar="PATH", help="write transfer events as JSON lines")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("serve", help="serve cosimulation endpoints over TCP")
    p.add_argument("file")
    p.add_argument("--port", type=int, default=cosim.DEFAULT_PORT, metavar="P")
    p.add_argument("--ticks-per-iter", type=int, default=1024, metavar="N")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("schema", help="export the endpoint manifest")
    p.add_argument("file")
    p.add_argument("--json", metavar="PATH", help="write instead of printing")
    p.set_defaults(fn=cmd_schema)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (UncheckedDesignError, DiagnosticsError) as exc:
        _print_diagnostics(exc.diagnostics)
        return 1
    except EsiError as exc:
        print(f"esic: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
