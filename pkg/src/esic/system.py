"""Declarative system descriptions: parsing and static checking.

A description is one JSON document with top-level keys `name`, `clocks`,
`modules`, `instances`, `connections`, `services`, `bindings` (schema
shipped in schema/system.schema.json). Port types use the canonical type
grammar. Parsing either yields a structurally valid SystemDesc or raises
DiagnosticsError carrying every independent problem found; there are no
partial results.

Diagnostic codes are stable:

    E001  connected ports have unequal types
    E002  input port driven by no connection
    E003  input port driven more than once
    E004  output port feeds more than one consumer (use a fork module)
    E005  service binding invalid (unknown service, wrong kind/direction/
          type/behavior, duplicate, or unbound host_endpoint port)
    E006  instance references an unknown clock domain (checker)
    E100  document is not valid JSON / not an object
    E101  missing field or wrong field kind
    E102  unresolved reference (clock, module, instance, or port)
    E103  duplicate name within a namespace
    E104  port type text does not parse
    E105  chunk_size missing, misplaced, or out of range
    E106  invalid field value (direction, period, stages, behavior, kind)
    E107  port profile does not match the declared builtin behavior
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import DiagnosticsError, TypeSyntaxError, NestedListError
from .types import (
    EsiType,
    ListType,
    UIntType,
    is_fixed_size,
    parse_type,
    print_type,
    type_equal,
)

BEHAVIORS = ("source", "sink", "map", "fork", "host_endpoint")
SERVICE_KINDS = ("host_comm", "telemetry", "assertion")

_CUSTOM_RE = re.compile(r"custom:[A-Za-z_][A-Za-z0-9_]*")
_ENDPOINT_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    location: str
    message: str

    def render(self) -> str:
        return f"{self.location}: {self.severity} {self.code}: {self.message}"


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # "in" | "out"
    type: EsiType
    chunk_size: int | None = None  # list ports only

    @property
    def is_list(self) -> bool:
        return isinstance(self.type, ListType)


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    ports: tuple[PortDecl, ...]
    behavior: str  # BEHAVIORS or "custom:<id>"

    def port(self, name: str) -> PortDecl | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class Instance:
    name: str
    module: str
    clock: str


@dataclass(frozen=True)
class Connection:
    src: tuple[str, str]  # (instance, out port)
    dst: tuple[str, str]  # (instance, in port)
    buffer_stages: int = 0
    monitored: bool = False


@dataclass(frozen=True)
class ServiceDecl:
    name: str
    kind: str
    out_width: int | None = None  # telemetry only


@dataclass(frozen=True)
class Binding:
    instance: str
    port: str
    service: str


@dataclass(frozen=True)
class ClockDomain:
    name: str
    period: int


@dataclass(frozen=True)
class SystemDesc:
    name: str
    clocks: tuple[ClockDomain, ...]
    modules: tuple[ModuleDecl, ...]
    instances: tuple[Instance, ...]
    connections: tuple[Connection, ...] = ()
    services: tuple[ServiceDecl, ...] = ()
    bindings: tuple[Binding, ...] = ()

    def module(self, name: str) -> ModuleDecl | None:
        for m in self.modules:
            if m.name == name:
                return m
        return None

    def instance(self, name: str) -> Instance | None:
        for i in self.instances:
            if i.name == name:
                return i
        return None

    def service(self, name: str) -> ServiceDecl | None:
        for s in self.services:
            if s.name == name:
                return s
        return None

    def port_of(self, inst_name: str, port_name: str) -> PortDecl | None:
        inst = self.instance(inst_name)
        if inst is None:
            return None
        mod = self.module(inst.module)
        if mod is None:
            return None
        return mod.port(port_name)


class _Collector:
    def __init__(self, filename: str):
        self.filename = filename
        self.diags: list[Diagnostic] = []

    def error(self, code: str, path: str, message: str) -> None:
        self.diags.append(
            Diagnostic("error", code, f"{self.filename}:{path}", message)
        )

    @property
    def failed(self) -> bool:
        return bool(self.diags)


def _get(c: _Collector, obj: dict, path: str, key: str, kind, required=True, default=None):
    """Typed field access; records E101 and returns default on mismatch."""
    if key not in obj:
        if required:
            c.error("E101", path, f"missing required field {key!r}")
        return default
    value = obj[key]
    if kind is int and isinstance(value, bool):
        c.error("E101", f"{path}.{key}", "expected an integer")
        return default
    if not isinstance(value, kind):
        c.error("E101", f"{path}.{key}", f"expected {kind.__name__}")
        return default
    return value


def _check_unknown_keys(c: _Collector, obj: dict, path: str, allowed: set[str]) -> None:
    for key in obj:
        if key not in allowed:
            c.error("E101", f"{path}.{key}", f"unknown field {key!r}")


def _parse_port(c: _Collector, raw, path: str) -> PortDecl | None:
    if not isinstance(raw, dict):
        c.error("E101", path, "port must be an object")
        return None
    _check_unknown_keys(c, raw, path, {"name", "dir", "type", "chunk_size"})
    name = _get(c, raw, path, "name", str)
    direction = _get(c, raw, path, "dir", str)
    type_text = _get(c, raw, path, "type", str)
    if name is not None and not _NAME_RE.fullmatch(name):
        c.error("E106", f"{path}.name", f"invalid port name {name!r}")
        name = None
    if direction is not None and direction not in ("in", "out"):
        c.error("E106", f"{path}.dir", f"direction must be 'in' or 'out', got {direction!r}")
        direction = None
    ptype = None
    if type_text is not None:
        try:
            ptype = parse_type(type_text)
        except (TypeSyntaxError, NestedListError) as exc:
            c.error("E104", f"{path}.type", str(exc))
    chunk = raw.get("chunk_size")
    if ptype is not None:
        if isinstance(ptype, ListType):
            if chunk is None:
                c.error("E105", path, "list port requires chunk_size")
            elif not isinstance(chunk, int) or isinstance(chunk, bool) or chunk < 1:
                c.error("E105", f"{path}.chunk_size", "chunk_size must be an integer >= 1")
                chunk = None
        elif chunk is not None:
            c.error("E105", f"{path}.chunk_size", "chunk_size is only valid on list ports")
            chunk = None
    if None in (name, direction, ptype):
        return None
    return PortDecl(name, direction, ptype, chunk if isinstance(ptype, ListType) else None)


def _profile_error(mod: ModuleDecl) -> str | None:
    """Builtin behaviors constrain the port profile."""
    ins = [p for p in mod.ports if p.direction == "in"]
    outs = [p for p in mod.ports if p.direction == "out"]
    b = mod.behavior
    if b == "source" and (ins or not outs):
        return "source modules have no input ports and at least one output"
    if b == "sink" and (outs or not ins):
        return "sink modules have no output ports and at least one input"
    if b == "map" and (len(ins) != 1 or len(outs) != 1):
        return "map modules have exactly one input and one output port"
    if b == "fork":
        if len(ins) != 1 or len(outs) < 2:
            return "fork modules have exactly one input and at least two outputs"
        for p in outs:
            if not type_equal(p.type, ins[0].type) or p.chunk_size != ins[0].chunk_size:
                return "fork ports must share one type and chunk size"
    if b == "host_endpoint" and not mod.ports:
        return "host_endpoint modules need at least one port"
    return None


def _parse_endpoint(c: _Collector, raw, path: str) -> tuple[str, str] | None:
    if not isinstance(raw, str):
        c.error("E101", path, "expected 'instance.port'")
        return None
    m = _ENDPOINT_RE.fullmatch(raw)
    if not m:
        c.error("E101", path, f"expected 'instance.port', got {raw!r}")
        return None
    return m.group(1), m.group(2)


def _dup_check(c: _Collector, names, what: str, path_fmt: str) -> None:
    seen: dict[str, int] = {}
    for i, n in enumerate(names):
        if n is None:
            continue
        if n in seen:
            c.error("E103", path_fmt.format(i), f"duplicate {what} name {n!r}")
        else:
            seen[n] = i


def parse_system(text: str, filename: str = "<input>") -> SystemDesc:
    """Parse a JSON system description.

    Raises DiagnosticsError with one diagnostic per independent problem;
    returns a structurally valid SystemDesc otherwise.
    """
    c = _Collector(filename)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        c.diags.append(
            Diagnostic(
                "error", "E100", f"{filename}:{exc.lineno}:{exc.colno}", exc.msg
            )
        )
        raise DiagnosticsError(c.diags)
    if not isinstance(doc, dict):
        c.error("E100", "$", "top level must be a JSON object")
        raise DiagnosticsError(c.diags)

    _check_unknown_keys(
        c, doc, "$",
        {"name", "clocks", "modules", "instances", "connections", "services", "bindings"},
    )
    name = _get(c, doc, "$", "name", str) or "design"

    def section(key: str, required: bool):
        raw = _get(c, doc, "$", key, list, required=required, default=[])
        return raw if isinstance(raw, list) else []

    clocks: list[ClockDomain] = []
    for i, raw in enumerate(section("clocks", True)):
        path = f"clocks[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "clock must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"name", "period"})
        cname = _get(c, raw, path, "name", str)
        period = _get(c, raw, path, "period", int)
        if period is not None and period < 1:
            c.error("E106", f"{path}.period", "period must be a positive tick count")
            period = None
        if cname is not None and period is not None:
            clocks.append(ClockDomain(cname, period))
    _dup_check(c, [k.name for k in clocks], "clock", "clocks[{}]")

    modules: list[ModuleDecl] = []
    for i, raw in enumerate(section("modules", True)):
        path = f"modules[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "module must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"name", "ports", "behavior"})
        mname = _get(c, raw, path, "name", str)
        behavior = _get(c, raw, path, "behavior", str)
        if behavior is not None and behavior not in BEHAVIORS and not _CUSTOM_RE.fullmatch(behavior):
            c.error(
                "E106", f"{path}.behavior",
                f"behavior must be one of {list(BEHAVIORS)} or 'custom:<id>'",
            )
            behavior = None
        ports: list[PortDecl] = []
        raw_ports = _get(c, raw, path, "ports", list, default=[])
        for j, rp in enumerate(raw_ports or []):
            p = _parse_port(c, rp, f"{path}.ports[{j}]")
            if p is not None:
                ports.append(p)
        _dup_check(c, [p.name for p in ports], "port", path + ".ports[{}]")
        if mname is None or behavior is None:
            continue
        mod = ModuleDecl(mname, tuple(ports), behavior)
        why = _profile_error(mod)
        if why is not None:
            c.error("E107", path, why)
        modules.append(mod)
    _dup_check(c, [m.name for m in modules], "module", "modules[{}]")

    module_by_name = {m.name: m for m in modules}
    clock_names = {k.name for k in clocks}

    instances: list[Instance] = []
    for i, raw in enumerate(section("instances", True)):
        path = f"instances[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "instance must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"name", "module", "clock"})
        iname = _get(c, raw, path, "name", str)
        mod = _get(c, raw, path, "module", str)
        clk = _get(c, raw, path, "clock", str)
        if mod is not None and mod not in module_by_name:
            c.error("E102", f"{path}.module", f"unknown module {mod!r}")
            mod = None
        if clk is not None and clk not in clock_names:
            # report, but keep the instance resolvable so that references
            # to it do not cascade into further errors
            c.error("E102", f"{path}.clock", f"unknown clock domain {clk!r}")
        if None in (iname, mod, clk):
            continue
        instances.append(Instance(iname, mod, clk))
    _dup_check(c, [i.name for i in instances], "instance", "instances[{}]")

    inst_by_name = {i.name: i for i in instances}

    def resolve_port(ep, path, want_dir):
        if ep is None:
            return None
        inst_name, port_name = ep
        inst = inst_by_name.get(inst_name)
        if inst is None:
            c.error("E102", path, f"unknown instance {inst_name!r}")
            return None
        port = module_by_name[inst.module].port(port_name)
        if port is None:
            c.error(
                "E102", path,
                f"module {inst.module!r} has no port {port_name!r}",
            )
            return None
        if port.direction != want_dir:
            c.error(
                "E106", path,
                f"{inst_name}.{port_name} is not an {want_dir} port",
            )
            return None
        return ep

    connections: list[Connection] = []
    for i, raw in enumerate(section("connections", False)):
        path = f"connections[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "connection must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"from", "to", "buffer_stages", "monitored"})
        src = resolve_port(
            _parse_endpoint(c, _get(c, raw, path, "from", str), f"{path}.from"),
            f"{path}.from", "out",
        )
        dst = resolve_port(
            _parse_endpoint(c, _get(c, raw, path, "to", str), f"{path}.to"),
            f"{path}.to", "in",
        )
        stages = _get(c, raw, path, "buffer_stages", int, required=False, default=0)
        if stages is not None and stages < 0:
            c.error("E106", f"{path}.buffer_stages", "buffer_stages must be >= 0")
            stages = None
        monitored = _get(c, raw, path, "monitored", bool, required=False, default=False)
        if None in (src, dst, stages, monitored):
            continue
        connections.append(Connection(src, dst, stages, monitored))

    services: list[ServiceDecl] = []
    for i, raw in enumerate(section("services", False)):
        path = f"services[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "service must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"name", "kind", "out_width"})
        sname = _get(c, raw, path, "name", str)
        kind = _get(c, raw, path, "kind", str)
        if kind is not None and kind not in SERVICE_KINDS:
            c.error("E106", f"{path}.kind", f"kind must be one of {list(SERVICE_KINDS)}")
            kind = None
        out_width = None
        if kind == "telemetry":
            out_width = _get(c, raw, path, "out_width", int)
            if out_width is not None and out_width < 1:
                c.error("E106", f"{path}.out_width", "out_width must be >= 1")
                out_width = None
            if out_width is None:
                kind = None
        elif raw.get("out_width") is not None:
            c.error("E106", f"{path}.out_width", "out_width is only valid on telemetry services")
        if sname is None or kind is None:
            continue
        services.append(ServiceDecl(sname, kind, out_width))
    _dup_check(c, [s.name for s in services], "service", "services[{}]")

    bindings: list[Binding] = []
    for i, raw in enumerate(section("bindings", False)):
        path = f"bindings[{i}]"
        if not isinstance(raw, dict):
            c.error("E101", path, "binding must be an object")
            continue
        _check_unknown_keys(c, raw, path, {"instance", "port", "service"})
        iname = _get(c, raw, path, "instance", str)
        pname = _get(c, raw, path, "port", str)
        sname = _get(c, raw, path, "service", str)
        if iname is not None:
            inst = inst_by_name.get(iname)
            if inst is None:
                c.error("E102", f"{path}.instance", f"unknown instance {iname!r}")
                iname = None
            elif pname is not None and module_by_name[inst.module].port(pname) is None:
                c.error(
                    "E102", f"{path}.port",
                    f"module {inst.module!r} has no port {pname!r}",
                )
                pname = None
        if None in (iname, pname, sname):
            continue
        bindings.append(Binding(iname, pname, sname))

    if c.failed:
        raise DiagnosticsError(c.diags)
    return SystemDesc(
        name=name,
        clocks=tuple(clocks),
        modules=tuple(modules),
        instances=tuple(instances),
        connections=tuple(connections),
        services=tuple(services),
        bindings=tuple(bindings),
    )


def load_system(path: str) -> SystemDesc:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system(fh.read(), filename=path)


def check(d: SystemDesc, filename: str = "<desc>") -> list[Diagnostic]:
    """Static wiring checks. Empty result means elaboration will succeed.

    Deterministic and order-stable; never raises. Hand-built descriptions
    with dangling references are reported (E102/E006) rather than crashed on.
    """
    c = _Collector(filename)

    # reference sanity for descriptions that did not come from the parser
    for i, inst in enumerate(d.instances):
        if d.module(inst.module) is None:
            c.error("E102", f"instances[{i}].module", f"unknown module {inst.module!r}")
        if not any(k.name == inst.clock for k in d.clocks):
            c.error("E006", f"instances[{i}].clock", f"unknown clock domain {inst.clock!r}")
    resolvable = not c.failed

    def port_at(ep):
        return d.port_of(ep[0], ep[1])

    usable: list[tuple[int, Connection, PortDecl, PortDecl]] = []
    for i, conn in enumerate(d.connections):
        src, dst = port_at(conn.src), port_at(conn.dst)
        path = f"connections[{i}]"
        if src is None or dst is None:
            c.error("E102", path, "connection endpoint does not resolve")
            continue
        if src.direction != "out" or dst.direction != "in":
            c.error("E106", path, "connection must run from an out port to an in port")
            continue
        usable.append((i, conn, src, dst))

    # (a) endpoint types equal; chunk sizes may differ on list ports
    for i, conn, src, dst in usable:
        if not type_equal(src.type, dst.type):
            c.error(
                "E001", f"connections[{i}]",
                f"type mismatch: {conn.src[0]}.{conn.src[1]} is "
                f"{print_type(src.type)} but {conn.dst[0]}.{conn.dst[1]} is "
                f"{print_type(dst.type)}",
            )

    # service bindings, by (instance, port)
    bind_by_port: dict[tuple[str, str], list[tuple[int, Binding]]] = {}
    for i, b in enumerate(d.bindings):
        bind_by_port.setdefault((b.instance, b.port), []).append((i, b))

    # (b)/(c) drive and fan-out accounting over every declared port
    if resolvable:
        drivers: dict[tuple[str, str], int] = {}
        consumers: dict[tuple[str, str], int] = {}
        for _, conn, _, _ in usable:
            consumers[conn.src] = consumers.get(conn.src, 0) + 1
            drivers[conn.dst] = drivers.get(conn.dst, 0) + 1
        for key, binds in bind_by_port.items():
            port = d.port_of(*key)
            if port is None or port.direction != "out":
                continue
            for _, b in binds:
                svc = d.service(b.service)
                if svc is not None and svc.kind in ("telemetry", "assertion"):
                    consumers[key] = consumers.get(key, 0) + 1
        for ii, inst in enumerate(d.instances):
            mod = d.module(inst.module)
            if mod is None:
                continue
            for port in mod.ports:
                key = (inst.name, port.name)
                if port.direction == "in":
                    n = drivers.get(key, 0)
                    if n == 0:
                        c.error(
                            "E002", f"instances[{ii}].{port.name}",
                            f"input {inst.name}.{port.name} is not driven",
                        )
                    elif n > 1:
                        c.error(
                            "E003", f"instances[{ii}].{port.name}",
                            f"input {inst.name}.{port.name} is driven {n} times",
                        )
                else:
                    n = consumers.get(key, 0)
                    if n > 1:
                        c.error(
                            "E004", f"instances[{ii}].{port.name}",
                            f"output {inst.name}.{port.name} feeds {n} consumers; "
                            "use an explicit fork module",
                        )

    # (d) service binding compatibility
    for key, binds in sorted(bind_by_port.items(), key=lambda kv: kv[1][0][0]):
        if len(binds) > 1:
            i = binds[1][0]
            c.error(
                "E005", f"bindings[{i}]",
                f"port {key[0]}.{key[1]} is bound more than once",
            )
    for i, b in enumerate(d.bindings):
        path = f"bindings[{i}]"
        svc = d.service(b.service)
        if svc is None:
            c.error("E005", path, f"unknown service {b.service!r}")
            continue
        inst = d.instance(b.instance)
        port = d.port_of(b.instance, b.port)
        if inst is None or port is None:
            if resolvable:
                c.error("E102", path, "binding endpoint does not resolve")
            continue
        mod = d.module(inst.module)
        behavior = mod.behavior if mod else ""
        if svc.kind == "host_comm":
            if behavior != "host_endpoint":
                c.error(
                    "E005", path,
                    "host_comm bindings require a host_endpoint module; "
                    f"{b.instance} is {behavior!r}",
                )
        else:
            if behavior == "host_endpoint":
                c.error(
                    "E005", path,
                    f"host_endpoint ports cannot bind to {svc.kind} services",
                )
                continue
            if port.direction != "out":
                c.error(
                    "E005", path,
                    f"{svc.kind} services consume data; bind an out port",
                )
                continue
            if svc.kind == "telemetry" and not is_fixed_size(port.type):
                c.error("E005", path, "telemetry payloads must be fixed-size")
            if svc.kind == "assertion" and not type_equal(port.type, UIntType(32)):
                c.error("E005", path, "assertion payloads must be uint32 codes")

    # every port of a host_endpoint instance carries exactly one host binding
    for ii, inst in enumerate(d.instances):
        mod = d.module(inst.module)
        if mod is None or mod.behavior != "host_endpoint":
            continue
        for port in mod.ports:
            binds = bind_by_port.get((inst.name, port.name), [])
            host_binds = [
                b for _, b in binds
                if d.service(b.service) is not None
                and d.service(b.service).kind == "host_comm"
            ]
            if not host_binds:
                c.error(
                    "E005", f"instances[{ii}].{port.name}",
                    f"host_endpoint port {inst.name}.{port.name} has no "
                    "host_comm binding",
                )

    return c.diags
