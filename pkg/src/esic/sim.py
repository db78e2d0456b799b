"""Cycle-accurate simulation of a fabric graph under valid/ready handshaking.

Each tick runs three steps for every clock domain firing at that tick
(a domain of period p fires when tick % p == 0):

 1. actor step: actors observe assembled input messages and free output
    slots, consuming and producing at most one message per port;
 2. handshake fixpoint: valid/ready/data settle across zero-latency
    elements; failure to settle within a node-count bound raises
    CombLoopError (only possible on zero-stage combinational cycles);
 3. commit: a beat moves on every edge whose domain fired and where
    valid and ready coincide; queues update, monitors count, the trace
    records completed messages.

Everything is deterministic given (graph, config, behaviors): stall
injection draws from a counter-based stream keyed by (seed, port label,
tick), so adding monitors or renumbering nodes never perturbs schedules.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import bitops, wire
from .errors import (
    BehaviorViolationError,
    CombLoopError,
    EsiError,
    NonzeroPadError,
    TruncatedError,
)
from .fabric import FabricGraph, FabricNode, validate_graph
from .random_data import random_value, seeded_rng
from .types import EsiType, ListType, bit_width, parse_type
from .wire import Beat, BitString, digest64, encode_message, gearbox_split

_U64 = 0xFFFFFFFFFFFFFFFF


def _mix64(x: int) -> int:
    x &= _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


def _stalled(seed: int, port_hash: int, tick: int, prob: float) -> bool:
    if prob <= 0.0:
        return False
    x = _mix64(seed ^ port_hash ^ ((tick * 0x9E3779B97F4A7C15) & _U64))
    return (x >> 11) / 9007199254740992.0 < prob


@dataclass
class SimConfig:
    seed: int = 0
    max_ticks: int = 1000
    stall_prob: float = 0.0
    monitor_latency: bool = False
    record_trace: bool = True
    record_payloads: bool = False  # full message bytes on trace events
    record_handshakes: bool = False
    check_conservation: bool = False
    mailbox_capacity: int = 1024

    def __post_init__(self):
        if not 0.0 <= self.stall_prob <= 1.0:
            raise ValueError("stall_prob must be within [0, 1]")
        if self.max_ticks < 1:
            raise ValueError("max_ticks must be >= 1")


@dataclass(frozen=True)
class SimBeat:
    """A beat in flight, tagged with its message's emission tick."""

    bits: BitString
    last: bool
    emit_tick: int


@dataclass(frozen=True)
class TraceEvent:
    """One completed message transfer on one edge."""

    tick: int
    edge: int
    ordinal: int
    digest: int  # 64-bit hash of the message's logical encoded bits
    beats: int  # physical beats the message took on this edge
    emit_tick: int
    payload: str | None = None  # message bytes (hex) when record_payloads


@dataclass
class MonitorRecord:
    connection: int
    fired_cycles: int = 0
    messages_accepted: int = 0
    beats_accepted: int = 0
    valid_not_ready_cycles: int = 0
    ready_not_valid_cycles: int = 0
    latency: dict[int, int] = field(default_factory=dict)


@dataclass
class SimResult:
    design: str
    seed: int
    ticks_executed: int
    trace: list[TraceEvent]
    monitors: dict[int, MonitorRecord]
    assertions_fired: list[dict]
    telemetry: list[dict]
    handshakes: list[tuple[int, int, bool, bool]] | None = None


class _MessageAssembler:
    """Reassembles an edge's beats into logical message bit strings.

    Fixed-size payloads complete every beat; framed lists follow their
    32-bit header and shed the final beat's zero padding.
    """

    def __init__(self, etype: EsiType | None, width: int):
        self._list = isinstance(etype, ListType)
        self._elem_width = bit_width(etype.element) if self._list else 0
        self._fixed_bits = width if etype is None or self._list else bit_width(etype)
        self._width = width
        self._acc = 0
        self._len = 0
        self._total: int | None = None

    @property
    def assembling(self) -> bool:
        return self._len > 0

    def push(self, beat: SimBeat) -> BitString | None:
        if not self._list:
            if not beat.last:
                raise EsiError("fixed-size edge carried a non-final beat")
            return beat.bits.window(0, self._fixed_bits)
        self._acc |= beat.bits.to_int() << self._len
        self._len += self._width
        if self._total is None and self._len >= wire.LIST_HEADER_BITS:
            count = self._acc & ((1 << wire.LIST_HEADER_BITS) - 1)
            self._total = wire.LIST_HEADER_BITS + count * self._elem_width
        if self._total is not None and self._len >= self._total:
            if not beat.last:
                raise EsiError("list message ran past its framed length")
            pad = self._len - self._total
            if pad and self._acc >> self._total:
                raise NonzeroPadError("nonzero padding inside the fabric")
            bits = BitString.from_int(self._acc & ((1 << self._total) - 1), self._total)
            self._acc, self._len, self._total = 0, 0, None
            return bits
        if beat.last:
            raise TruncatedError("list message ended before its framed length")
        return None


def _split_message(value, etype: EsiType, width: int, tick: int) -> list[SimBeat]:
    bits = encode_message(value, etype)
    return [SimBeat(b.bits, b.last, tick) for b in gearbox_split(bits, width)]


# --- actor behaviors -------------------------------------------------------


class ActorContext:
    """Per-firing view an actor behavior gets of its ports."""

    def __init__(self, runtime: "_ActorRuntime", tick: int):
        self._rt = runtime
        self.tick = tick
        self.name = runtime.node.name

    @property
    def in_ports(self) -> list[str]:
        return self._rt.in_port_names

    @property
    def out_ports(self) -> list[str]:
        return self._rt.out_port_names

    def port_type(self, port: str) -> EsiType:
        return self._rt.port_types[port]

    def available(self, port: str) -> bool:
        return self._rt.pending_value(port) is not None

    def peek(self, port: str):
        pending = self._rt.pending_value(port)
        if pending is None:
            raise BehaviorViolationError(
                f"{self.name}: peek on {port!r} with no message available"
            )
        return pending[0]

    def consume(self, port: str):
        value = self.peek(port)
        self._rt.clear_pending(port)
        return value

    def can_produce(self, port: str) -> bool:
        return self._rt.can_produce(port)

    def produce(self, port: str, value) -> None:
        self._rt.produce(port, value, self.tick)


class ActorBehavior:
    """Contract: step() fires once per tick of the actor's clock domain."""

    def on_start(self, ctx: ActorContext) -> None:
        pass

    def step(self, ctx: ActorContext) -> None:
        raise NotImplementedError

    def input_ready(self, port: str) -> bool:
        """Gate on accepting beats at port; must be stable within a tick."""
        return True


class ScriptedSource(ActorBehavior):
    """Emits a fixed message sequence on each output port."""

    def __init__(self, script: Sequence | Mapping[str, Sequence]):
        self._script = script
        self._queues: dict[str, deque] = {}

    def on_start(self, ctx: ActorContext) -> None:
        if isinstance(self._script, Mapping):
            for port, values in self._script.items():
                self._queues[port] = deque(values)
        else:
            if len(ctx.out_ports) != 1:
                raise BehaviorViolationError(
                    f"{ctx.name}: a plain list script needs exactly one out port"
                )
            self._queues[ctx.out_ports[0]] = deque(self._script)

    def step(self, ctx: ActorContext) -> None:
        for port, q in self._queues.items():
            if q and ctx.can_produce(port):
                ctx.produce(port, q.popleft())

    @property
    def exhausted(self) -> bool:
        return all(not q for q in self._queues.values())


class RandomSource(ActorBehavior):
    """Endless deterministic random messages, derived from the run seed."""

    def __init__(self, seed: int, max_list_len: int = 8):
        self._seed = seed
        self._max_list_len = max_list_len
        self._rngs: dict[str, object] = {}

    def step(self, ctx: ActorContext) -> None:
        for port in ctx.out_ports:
            if not ctx.can_produce(port):
                continue
            rng = self._rngs.get(port)
            if rng is None:
                rng = seeded_rng(self._seed, "source", ctx.name, port)
                self._rngs[port] = rng
            ctx.produce(port, random_value(rng, ctx.port_type(port), self._max_list_len))


class CollectingSink(ActorBehavior):
    """Consumes every available message and keeps them in arrival order."""

    def __init__(self):
        self.received: dict[str, list] = {}

    def on_start(self, ctx: ActorContext) -> None:
        self.received = {}

    def step(self, ctx: ActorContext) -> None:
        for port in ctx.in_ports:
            if ctx.available(port):
                self.received.setdefault(port, []).append(ctx.consume(port))

    def values(self, port: str | None = None) -> list:
        if port is None:
            if len(self.received) == 1:
                return next(iter(self.received.values()))
            merged: list = []
            for vs in self.received.values():
                merged.extend(vs)
            return merged
        return self.received.get(port, [])


class FnMap(ActorBehavior):
    """One-in one-out transform; identity when fn is None."""

    def __init__(self, fn: Callable | None = None):
        self._fn = fn

    def step(self, ctx: ActorContext) -> None:
        src, dst = ctx.in_ports[0], ctx.out_ports[0]
        if ctx.available(src) and ctx.can_produce(dst):
            value = ctx.consume(src)
            ctx.produce(dst, value if self._fn is None else self._fn(value))


class _AssertionSink(ActorBehavior):
    """Internal terminus of an assertion service; records fired alerts."""

    def __init__(self, engine: "Engine", service: str, tag_bits: int, clients: list[str]):
        self._engine = engine
        self._service = service
        self._tag_bits = tag_bits
        self._clients = clients

    def step(self, ctx: ActorContext) -> None:
        port = ctx.in_ports[0]
        if ctx.available(port):
            raw = ctx.consume(port)
            tag = raw & ((1 << self._tag_bits) - 1)
            code = (raw >> self._tag_bits) & 0xFFFFFFFF
            self._engine.assertions_fired.append(
                {
                    "tick": ctx.tick,
                    "service": self._service,
                    "client": self._clients[tag] if tag < len(self._clients) else tag,
                    "code": code,
                }
            )


# --- runtime nodes ---------------------------------------------------------


class _Runtime:
    has_phase0 = False

    def __init__(self, node: FabricNode, engine: "Engine"):
        self.node = node
        self.engine = engine
        self.in_edges: dict[str, int] = {}
        self.out_edges: dict[str, int] = {}
        self.accepted = 0
        self.emitted = 0

    def start(self) -> None:
        pass

    def tick_start(self, tick: int) -> None:
        pass

    def eval(self, tick: int) -> bool:
        return False

    def out_commit(self, edge_id: int) -> None:
        self.emitted += 1

    def in_commit(self, edge_id: int, beat: SimBeat) -> None:
        self.accepted += 1

    def occupancy(self) -> int | None:
        """Beats held; None when the node does not conserve beats."""
        return None


class _BufferStage(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.q: deque[SimBeat] = deque()

    def eval(self, tick):
        eng = self.engine
        changed = eng.set_ready(self.in_edges["in"], len(self.q) < 2)
        if self.q:
            changed |= eng.set_valid(self.out_edges["out"], True, self.q[0])
        else:
            changed |= eng.set_valid(self.out_edges["out"], False, None)
        return changed

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        self.q.popleft()

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        self.q.append(beat)

    def occupancy(self):
        return len(self.q)


class _CdcFifo(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.depth = node.params["depth"]
        self.q: deque[SimBeat] = deque()

    def eval(self, tick):
        eng = self.engine
        changed = eng.set_ready(self.in_edges["in"], len(self.q) < self.depth)
        if self.q:
            changed |= eng.set_valid(self.out_edges["out"], True, self.q[0])
        else:
            changed |= eng.set_valid(self.out_edges["out"], False, None)
        return changed

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        self.q.popleft()

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        self.q.append(beat)

    def occupancy(self):
        return len(self.q)


class _RepackerNode(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        p = node.params
        self.gasket = wire.Repacker(p["elem_width"], p["w_in"], p["w_out"])
        self.q: deque[SimBeat] = deque()
        self._emit_tick = 0

    def eval(self, tick):
        eng = self.engine
        changed = eng.set_ready(self.in_edges["in"], not self.q)
        if self.q:
            changed |= eng.set_valid(self.out_edges["out"], True, self.q[0])
        else:
            changed |= eng.set_valid(self.out_edges["out"], False, None)
        return changed

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        self.q.popleft()

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        if self.gasket.idle:
            self._emit_tick = beat.emit_tick
        for out in self.gasket.push(Beat(beat.bits, beat.last)):
            self.q.append(SimBeat(out.bits, out.last, self._emit_tick))


class _Fork(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.in_port = node.params["in_port"]
        self.out_ports = list(node.params["out_ports"])

    def eval(self, tick):
        eng = self.engine
        e_in = self.in_edges[self.in_port]
        outs = [self.out_edges[p] for p in self.out_ports]
        in_valid = eng.valid[e_in]
        beat = eng.data[e_in]
        changed = False
        for i, e in enumerate(outs):
            others = all(eng.ready[o] for j, o in enumerate(outs) if j != i)
            v = in_valid and others
            changed |= eng.set_valid(e, v, beat if v else None)
        changed |= eng.set_ready(e_in, all(eng.ready[o] for o in outs))
        return changed


class _ServiceMux(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.n = node.params["n"]
        self.tag_bits = node.params["tag_bits"]
        self.width = node.params["tag_bits"] + node.params["payload_width"]
        self.rr = 0
        self._grant: int | None = None

    def eval(self, tick):
        eng = self.engine
        ins = [self.in_edges[f"in{i}"] for i in range(self.n)]
        out = self.out_edges["out"]
        grant = None
        for k in range(self.n):
            i = (self.rr + k) % self.n
            if eng.valid[ins[i]]:
                grant = i
                break
        self._grant = grant
        out_ready = eng.ready[out]
        changed = False
        if grant is None:
            changed |= eng.set_valid(out, False, None)
        else:
            src = eng.data[ins[grant]]
            value = grant | (src.bits.to_int() << self.tag_bits)
            tagged = SimBeat(BitString.from_int(value, self.width), True, src.emit_tick)
            changed |= eng.set_valid(out, True, tagged)
        for i, e in enumerate(ins):
            changed |= eng.set_ready(e, grant == i and out_ready)
        return changed

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        if self._grant is not None:
            self.rr = (self._grant + 1) % self.n


class _ServiceDemux(_Runtime):
    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.n = node.params["n"]
        self.tag_bits = node.params["tag_bits"]

    def eval(self, tick):
        eng = self.engine
        e_in = self.in_edges["in"]
        outs = [self.out_edges[f"out{i}"] for i in range(self.n)]
        changed = False
        tag = None
        if eng.valid[e_in]:
            tag = eng.data[e_in].bits.window(0, self.tag_bits).to_int()
            if tag >= self.n:
                raise EsiError(f"{self.node.name}: routing tag {tag} out of range")
        for i, e in enumerate(outs):
            v = tag == i
            changed |= eng.set_valid(e, v, eng.data[e_in] if v else None)
        changed |= eng.set_ready(e_in, tag is not None and eng.ready[outs[tag]])
        return changed


class _Serializer(_Runtime):
    has_phase0 = True

    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.out_width = node.params["out_width"]
        self.in_width = node.params["in_width"]
        self.remaining = 0
        self.messages = 0
        self.narrow_beats = 0

    def tick_start(self, tick):
        if self.remaining > 0:
            self.narrow_beats += 1
            self.remaining -= self.out_width

    def eval(self, tick):
        return self.engine.set_ready(self.in_edges["in"], self.remaining <= 0)

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        self.messages += 1
        self.remaining = self.in_width


class _Monitor(_Runtime):
    pass  # passive; the engine samples its tapped edge directly


class _ActorRuntime(_Runtime):
    has_phase0 = True

    def __init__(self, node, engine, behavior: ActorBehavior):
        super().__init__(node, engine)
        self.behavior = behavior
        self.port_types: dict[str, EsiType] = {}
        self.port_widths: dict[str, int] = {}
        self.in_port_names: list[str] = []
        self.out_port_names: list[str] = []
        self._stall_hash: dict[str, int] = {}
        for p in node.params["ports"]:
            t = parse_type(p["type"])
            self.port_types[p["name"]] = t
            if isinstance(t, ListType):
                self.port_widths[p["name"]] = p["chunk_size"] * bit_width(t.element)
            else:
                self.port_widths[p["name"]] = bit_width(t)
            (self.in_port_names if p["dir"] == "in" else self.out_port_names).append(
                p["name"]
            )
        self._assemblers: dict[str, _MessageAssembler] = {}
        self._pending: dict[str, tuple | None] = {p: None for p in self.in_port_names}
        self._out_q: dict[str, deque[SimBeat]] = {
            p: deque() for p in self.out_port_names
        }
        self._stalls_on = node.params.get("behavior") != "assertion_sink"

    def start(self):
        self.behavior.on_start(ActorContext(self, 0))

    def _stall(self, port: str, tick: int) -> bool:
        if not self._stalls_on or self.engine.config.stall_prob <= 0.0:
            return False
        h = self._stall_hash.get(port)
        if h is None:
            h = self.engine.port_hash(self.node.name, port)
            self._stall_hash[port] = h
        return _stalled(self.engine.config.seed, h, tick, self.engine.config.stall_prob)

    def pending_value(self, port: str):
        return self._pending.get(port)

    def clear_pending(self, port: str) -> None:
        self._pending[port] = None

    def can_produce(self, port: str) -> bool:
        if port not in self._out_q:
            raise BehaviorViolationError(f"{self.node.name}: no out port {port!r}")
        return not self._out_q[port]

    def produce(self, port: str, value, tick: int) -> None:
        if not self.can_produce(port):
            raise BehaviorViolationError(
                f"{self.node.name}: produce on busy port {port!r}"
            )
        try:
            beats = _split_message(value, self.port_types[port], self.port_widths[port], tick)
        except EsiError as exc:
            raise BehaviorViolationError(
                f"{self.node.name}: bad value for {port!r}: {exc}"
            ) from exc
        if port in self.out_edges:
            self._out_q[port].extend(beats)
        # an unconnected output swallows its messages

    def tick_start(self, tick):
        self.behavior.step(ActorContext(self, tick))

    def eval(self, tick):
        eng = self.engine
        changed = False
        for port in self.in_port_names:
            e = self.in_edges.get(port)
            if e is None:
                continue
            accepting = (
                self._pending[port] is None
                and self.behavior.input_ready(port)
            )
            changed |= eng.set_ready(e, accepting and not self._stall(port, tick))
        for port in self.out_port_names:
            e = self.out_edges.get(port)
            if e is None:
                continue
            q = self._out_q[port]
            if q and not self._stall(port, tick):
                changed |= eng.set_valid(e, True, q[0])
            else:
                changed |= eng.set_valid(e, False, None)
        return changed

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        for port, e in self.out_edges.items():
            if e == edge_id:
                self._out_q[port].popleft()
                return

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        for port, e in self.in_edges.items():
            if e != edge_id:
                continue
            asm = self._assemblers.get(port)
            if asm is None:
                asm = _MessageAssembler(
                    self.port_types[port], self.port_widths[port]
                )
                self._assemblers[port] = asm
            bits = asm.push(beat)
            if bits is not None:
                value = wire.decode_message(bits, self.port_types[port])
                self._pending[port] = (value, beat.emit_tick)
            return


class _FromHostEndpoint(_Runtime):
    has_phase0 = True

    def __init__(self, node, engine):
        super().__init__(node, engine)
        self.width = node.params["width"]
        self.mailbox: deque[BitString] = deque()
        self.q: deque[SimBeat] = deque()

    def tick_start(self, tick):
        if not self.q and self.mailbox:
            bits = self.mailbox.popleft()
            for b in gearbox_split(bits, self.width):
                self.q.append(SimBeat(b.bits, b.last, tick))

    def eval(self, tick):
        eng = self.engine
        e = self.out_edges.get("out")
        if e is None:
            return False
        if self.q:
            return eng.set_valid(e, True, self.q[0])
        return eng.set_valid(e, False, None)

    def out_commit(self, edge_id):
        super().out_commit(edge_id)
        self.q.popleft()


class _ToHostEndpoint(_Runtime):
    has_phase0 = True

    def __init__(self, node, engine):
        super().__init__(node, engine)
        etype = parse_type(node.params["type"])
        self.width = node.params["width"]
        self.asm = _MessageAssembler(etype, self.width)
        self.host_q: deque[bytes] = deque()
        self._complete: BitString | None = None

    def tick_start(self, tick):
        self._drain()

    def _drain(self):
        if (
            self._complete is not None
            and len(self.host_q) < self.engine.config.mailbox_capacity
        ):
            self.host_q.append(self._complete.to_bytes())
            self._complete = None

    def eval(self, tick):
        eng = self.engine
        e = self.in_edges.get("in")
        if e is None:
            return False
        return eng.set_ready(e, self._complete is None)

    def in_commit(self, edge_id, beat):
        super().in_commit(edge_id, beat)
        bits = self.asm.push(beat)
        if bits is not None:
            self._complete = bits
            self._drain()


_PASSIVE_KINDS = {
    "buffer_stage": _BufferStage,
    "cdc_fifo": _CdcFifo,
    "repacker": _RepackerNode,
    "fork": _Fork,
    "service_mux": _ServiceMux,
    "service_demux": _ServiceDemux,
    "telemetry_serializer": _Serializer,
    "monitor": _Monitor,
}


# --- engine ----------------------------------------------------------------


class Engine:
    """Single-threaded stepping simulator over an elaborated graph.

    run() drives a fixed number of ticks; the cosim server instead calls
    step() between protocol turns. Results are immutable snapshots.
    """

    def __init__(
        self,
        graph: FabricGraph,
        config: SimConfig | None = None,
        behaviors: Mapping[str, ActorBehavior] | None = None,
    ):
        validate_graph(graph)
        self.graph = graph
        self.config = config or SimConfig()
        behaviors = dict(behaviors or {})

        n_edges = len(graph.edges)
        self.valid = [False] * n_edges
        self.ready = [False] * n_edges
        self.data: list[SimBeat | None] = [None] * n_edges

        self.tick = 0
        self.ticks_executed = 0
        self.trace: list[TraceEvent] = []
        self.assertions_fired: list[dict] = []
        self.handshakes: list[tuple[int, int, bool, bool]] = []
        self._edge_ordinal = [0] * n_edges
        self._edge_beats = [0] * n_edges
        self._edge_asm: list[_MessageAssembler | None] = [None] * n_edges

        self.runtimes: list[_Runtime] = []
        self.endpoints: dict[str, _Runtime] = {}
        for node in graph.nodes:
            self.runtimes.append(self._build_runtime(node, behaviors))
        for name in behaviors:
            if not any(
                rt.node.name == name and isinstance(rt, _ActorRuntime)
                for rt in self.runtimes
            ):
                raise BehaviorViolationError(f"behavior for unknown actor {name!r}")

        for edge in graph.edges:
            self.runtimes[edge.src[0]].out_edges[edge.src[1]] = edge.id
            self.runtimes[edge.dst[0]].in_edges[edge.dst[1]] = edge.id

        self._monitors: list[tuple[int, str, MonitorRecord]] = []
        self.monitor_records: dict[int, MonitorRecord] = {}
        for node in graph.nodes:
            if node.kind == "monitor":
                record = MonitorRecord(connection=node.params["connection"])
                edge = graph.edges[node.params["edge"]]
                self._monitors.append((edge.id, edge.domain, record))
                self.monitor_records[node.params["connection"]] = record

        self._phase0 = [rt for rt in self.runtimes if rt.has_phase0]
        for rt in self.runtimes:
            rt.start()

    def _build_runtime(self, node: FabricNode, behaviors) -> _Runtime:
        if node.kind in _PASSIVE_KINDS:
            return _PASSIVE_KINDS[node.kind](node, self)
        if node.kind == "cosim_endpoint":
            if node.params["direction"] == "from_host":
                rt = _FromHostEndpoint(node, self)
            else:
                rt = _ToHostEndpoint(node, self)
            self.endpoints[node.params["endpoint"]] = rt
            return rt
        if node.kind == "actor":
            behavior = behaviors.get(node.name)
            if behavior is None:
                behavior = self._default_behavior(node)
            return _ActorRuntime(node, self, behavior)
        raise EsiError(f"unknown fabric node kind {node.kind!r}")

    def _default_behavior(self, node: FabricNode) -> ActorBehavior:
        b = node.params.get("behavior", "")
        if b == "source":
            return RandomSource(self.config.seed)
        if b == "sink":
            return CollectingSink()
        if b == "map":
            ports = node.params["ports"]
            types = {p["name"]: p["type"] for p in ports}
            ins = [p["name"] for p in ports if p["dir"] == "in"]
            outs = [p["name"] for p in ports if p["dir"] == "out"]
            if types[ins[0]] != types[outs[0]]:
                raise BehaviorViolationError(
                    f"{node.name}: map with differing port types needs an "
                    "explicit behavior"
                )
            return FnMap(None)
        if b == "assertion_sink":
            return _AssertionSink(
                self, node.params["service"], node.params["tag_bits"],
                node.params["clients"],
            )
        raise BehaviorViolationError(
            f"actor {node.name!r} ({b or 'custom'}) needs a behavior"
        )

    # -- signal plane --

    def set_valid(self, edge_id: int, v: bool, beat: SimBeat | None) -> bool:
        if self.valid[edge_id] == v and self.data[edge_id] == beat:
            return False
        self.valid[edge_id] = v
        self.data[edge_id] = beat
        return True

    def set_ready(self, edge_id: int, r: bool) -> bool:
        if self.ready[edge_id] == r:
            return False
        self.ready[edge_id] = r
        return True

    def port_hash(self, node_name: str, port: str) -> int:
        return bitops.fnv1a64(f"{node_name}.{port}".encode())

    # -- host mailboxes --

    def inject(self, endpoint: str, bits: BitString) -> bool:
        """Queue one host message; False when the mailbox is full."""
        rt = self.endpoints.get(endpoint)
        if not isinstance(rt, _FromHostEndpoint):
            raise EsiError(f"{endpoint!r} is not a from_host endpoint")
        if len(rt.mailbox) >= self.config.mailbox_capacity:
            return False
        rt.mailbox.append(bits)
        return True

    def drain(self, endpoint: str) -> bytes | None:
        rt = self.endpoints.get(endpoint)
        if not isinstance(rt, _ToHostEndpoint):
            raise EsiError(f"{endpoint!r} is not a to_host endpoint")
        if rt.host_q:
            return rt.host_q.popleft()
        return None

    # -- stepping --

    def _fired(self, tick: int) -> dict[str, bool]:
        return {d: tick % p == 0 for d, p in self.graph.domains.items()}

    def step(self, n_ticks: int) -> None:
        for _ in range(n_ticks):
            self._run_tick(self.tick)
            self.tick += 1
            self.ticks_executed += 1

    def _run_tick(self, tick: int) -> None:
        fired = self._fired(tick)
        for rt in self._phase0:
            if fired[rt.node.domain]:
                rt.tick_start(tick)

        limit = len(self.runtimes) + 2
        sweeps = 0
        while True:
            changed = False
            for rt in self.runtimes:
                if rt.eval(tick):
                    changed = True
            if not changed:
                break
            sweeps += 1
            if sweeps >= limit:
                raise CombLoopError(
                    f"handshake fixpoint did not settle at tick {tick}; "
                    "a zero-stage combinational cycle is present"
                )

        committed = [False] * len(self.graph.edges)
        for edge in self.graph.edges:
            e = edge.id
            if not fired[edge.domain] or not (self.valid[e] and self.ready[e]):
                continue
            committed[e] = True
            beat = self.data[e]
            self._edge_beats[e] += 1
            if self.config.record_trace:
                asm = self._edge_asm[e]
                if asm is None:
                    asm = _MessageAssembler(edge.type, edge.width)
                    self._edge_asm[e] = asm
                bits = asm.push(beat)
                if bits is not None:
                    self.trace.append(
                        TraceEvent(
                            tick=tick,
                            edge=e,
                            ordinal=self._edge_ordinal[e],
                            digest=digest64(bits),
                            beats=self._edge_beats[e],
                            emit_tick=beat.emit_tick,
                            payload=(
                                bits.to_bytes().hex()
                                if self.config.record_payloads
                                else None
                            ),
                        )
                    )
                    self._edge_ordinal[e] += 1
                    self._edge_beats[e] = 0
            self.runtimes[edge.src[0]].out_commit(e)
            self.runtimes[edge.dst[0]].in_commit(e, beat)

        for edge_id, domain, record in self._monitors:
            if not fired[domain]:
                continue
            record.fired_cycles += 1
            v, r = self.valid[edge_id], self.ready[edge_id]
            if self.config.record_handshakes:
                self.handshakes.append((tick, edge_id, v, r))
            if committed[edge_id]:
                record.beats_accepted += 1
                beat = self.data[edge_id]
                if beat.last:
                    record.messages_accepted += 1
                    if self.config.monitor_latency:
                        lat = tick - beat.emit_tick
                        record.latency[lat] = record.latency.get(lat, 0) + 1
            elif v and not r:
                record.valid_not_ready_cycles += 1
            elif r and not v:
                record.ready_not_valid_cycles += 1

        if self.config.check_conservation:
            for rt in self.runtimes:
                occ = rt.occupancy()
                if occ is not None and rt.accepted - rt.emitted != occ:
                    raise EsiError(
                        f"{rt.node.name}: conservation violated "
                        f"({rt.accepted} in - {rt.emitted} out != {occ} held)"
                    )

    def result(self) -> SimResult:
        telemetry = [
            {
                "service": rt.node.params["service"],
                "out_width": rt.out_width,
                "messages": rt.messages,
                "narrow_beats": rt.narrow_beats,
            }
            for rt in self.runtimes
            if isinstance(rt, _Serializer)
        ]
        return SimResult(
            design=self.graph.name,
            seed=self.config.seed,
            ticks_executed=self.ticks_executed,
            trace=list(self.trace),
            monitors={k: v for k, v in sorted(self.monitor_records.items())},
            assertions_fired=list(self.assertions_fired),
            telemetry=telemetry,
            handshakes=list(self.handshakes) if self.config.record_handshakes else None,
        )


def run(
    graph: FabricGraph,
    config: SimConfig | None = None,
    behaviors: Mapping[str, ActorBehavior] | None = None,
) -> SimResult:
    """Simulate max_ticks ticks and return the immutable result."""
    engine = Engine(graph, config, behaviors)
    engine.step(engine.config.max_ticks)
    return engine.result()


# --- delivery verification -------------------------------------------------


def verify_delivery(result: SimResult, graph: FabricGraph) -> list[str]:
    """Loss/duplication/order checks per connection; empty when clean."""
    violations: list[str] = []
    by_edge: dict[int, list[TraceEvent]] = {}
    for ev in result.trace:
        by_edge.setdefault(ev.edge, []).append(ev)
    for edge_id, events in sorted(by_edge.items()):
        for prev, cur in zip(events, events[1:]):
            if cur.ordinal <= prev.ordinal:
                violations.append(
                    f"edge {edge_id}: ordinal {cur.ordinal} after {prev.ordinal}"
                )
    for meta in graph.connections:
        sent = [ev.digest for ev in by_edge.get(meta.first_edge, [])]
        recv = [ev.digest for ev in by_edge.get(meta.last_edge, [])]
        if len(recv) > len(sent):
            violations.append(
                f"connection {meta.index}: delivered {len(recv)} > sent {len(sent)}"
            )
        for i, (a, b) in enumerate(zip(sent, recv)):
            if a != b:
                violations.append(
                    f"connection {meta.index}: message {i} delivered out of "
                    "order or corrupted"
                )
                break
        in_flight = len(sent) - len(recv)
        if in_flight > meta.capacity_beats:
            violations.append(
                f"connection {meta.index}: {in_flight} in flight exceeds "
                f"path capacity {meta.capacity_beats}"
            )
    return violations


# --- reporting -------------------------------------------------------------


def monitor_report(result: SimResult, graph: FabricGraph) -> dict:
    """Deterministic JSON-able telemetry summary of a finished run."""
    connections = []
    for meta in graph.connections:
        record = result.monitors.get(meta.index)
        if record is None:
            continue
        fired = record.fired_cycles
        entry = {
            "connection": meta.index,
            "from": meta.src,
            "to": meta.dst,
            "fired_cycles": fired,
            "messages_accepted": record.messages_accepted,
            "beats_accepted": record.beats_accepted,
            "valid_not_ready_cycles": record.valid_not_ready_cycles,
            "ready_not_valid_cycles": record.ready_not_valid_cycles,
            "messages_per_cycle": record.messages_accepted / fired if fired else 0.0,
            "backpressure_fraction": (
                record.valid_not_ready_cycles / fired if fired else 0.0
            ),
        }
        if record.latency:
            lats = sorted(record.latency)
            total = sum(record.latency.values())
            mean = sum(k * v for k, v in record.latency.items()) / total
            entry["latency"] = {
                "min": lats[0],
                "max": lats[-1],
                "mean": mean,
                "histogram": {str(k): record.latency[k] for k in lats},
            }
        connections.append(entry)
    return {
        "design": result.design,
        "seed": result.seed,
        "ticks": result.ticks_executed,
        "connections": connections,
        "telemetry": result.telemetry,
        "assertions": {
            "count": len(result.assertions_fired),
            "events": result.assertions_fired,
        },
        "trace_events": len(result.trace),
    }


def render_report_text(report: dict) -> str:
    lines = [
        f"design {report['design']}  seed {report['seed']}  "
        f"ticks {report['ticks']}",
    ]
    for c in report["connections"]:
        lines.append(
            f"connection {c['connection']} {c['from']} -> {c['to']}: "
            f"{c['messages_accepted']} msgs / {c['beats_accepted']} beats "
            f"over {c['fired_cycles']} cycles; "
            f"rate {c['messages_per_cycle']:.4f}, "
            f"backpressure {c['backpressure_fraction']:.4f}"
        )
        if "latency" in c:
            lat = c["latency"]
            lines.append(
                f"  latency min {lat['min']} max {lat['max']} "
                f"mean {lat['mean']:.3f}"
            )
    for t in report["telemetry"]:
        lines.append(
            f"telemetry {t['service']}: {t['messages']} msgs serialized onto "
            f"{t['out_width']} wire(s) as {t['narrow_beats']} beats"
        )
    a = report["assertions"]
    lines.append(f"assertions fired: {a['count']}")
    for ev in a["events"]:
        lines.append(
            f"  tick {ev['tick']}: {ev['client']} code {ev['code']} "
            f"({ev['service']})"
        )
    lines.append(f"trace events: {report['trace_events']}")
    return "\n".join(lines) + "\n"
