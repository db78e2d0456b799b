"""Lowering a checked system description into a primitive fabric graph.

Node kinds:

    actor                 user module instance (or an internal service sink)
    buffer_stage          capacity-2 elastic stage; breaks ready/valid timing
    repacker              streaming chunk-size gasket for list channels
    cdc_fifo              depth-bounded FIFO bridging two clock domains
    fork                  all-ready broadcast of one stream to n consumers
    monitor               passive tap on one connection's final edge
    service_mux           round-robin arbiter; prefixes a client-index tag
    service_demux         routes a tagged stream back to n consumers
    telemetry_serializer  drains tagged messages onto out_width wires
    cosim_endpoint        host-visible injection/extraction point

Per connection, elaboration inserts (in order from the producer): one
repacker when the two list ports disagree on chunk size, the requested
buffer stages, and one cdc_fifo when the endpoints sit in different clock
domains; a monitored connection gets a monitor node observing its final
edge. Services lower to one cosim_endpoint per host_comm binding, and to
a service_mux feeding a telemetry_serializer (telemetry) or an assertion
sink actor (assertion); clients in other domains get a cdc_fifo on their
service edge.

Node and edge ids are assigned in document order, so elaboration is
deterministic: equal descriptions produce identical graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EsiError, UncheckedDesignError
from .system import PortDecl, SystemDesc, check
from .types import (
    EsiType,
    ListType,
    bit_width,
    parse_type,
    print_type,
    tag_width,
)

CDC_DEFAULT_DEPTH = 4
GRAPH_SCHEMA_VERSION = 1


def port_width(port: PortDecl) -> int:
    """Physical wire width of a port: bit_width, or chunk * element width."""
    if isinstance(port.type, ListType):
        return port.chunk_size * bit_width(port.type.element)
    return bit_width(port.type)


@dataclass
class FabricNode:
    id: int
    kind: str
    name: str
    domain: str
    params: dict = field(default_factory=dict)

    def in_port_names(self) -> list[str]:
        k = self.kind
        if k == "actor":
            return [p["name"] for p in self.params["ports"] if p["dir"] == "in"]
        if k in ("buffer_stage", "repacker", "cdc_fifo", "telemetry_serializer"):
            return ["in"]
        if k == "fork":
            return [self.params["in_port"]]
        if k == "service_mux":
            return [f"in{i}" for i in range(self.params["n"])]
        if k == "service_demux":
            return ["in"]
        if k == "cosim_endpoint":
            return ["in"] if self.params["direction"] == "to_host" else []
        return []

    def out_port_names(self) -> list[str]:
        k = self.kind
        if k == "actor":
            return [p["name"] for p in self.params["ports"] if p["dir"] == "out"]
        if k in ("buffer_stage", "repacker", "cdc_fifo"):
            return ["out"]
        if k == "fork":
            return list(self.params["out_ports"])
        if k == "service_mux":
            return ["out"]
        if k == "service_demux":
            return [f"out{i}" for i in range(self.params["n"])]
        if k == "cosim_endpoint":
            return ["out"] if self.params["direction"] == "from_host" else []
        return []


@dataclass
class FabricEdge:
    id: int
    src: tuple[int, str]  # (node id, out port)
    dst: tuple[int, str]  # (node id, in port)
    type: EsiType | None  # None on service-internal tagged edges
    width: int
    domain: str
    connection: int | None = None  # originating connection index


@dataclass
class ConnectionMeta:
    index: int
    src: str
    dst: str
    stages: int
    monitored: bool
    first_edge: int
    last_edge: int
    capacity_beats: int
    monitor_node: int | None = None


@dataclass
class EndpointInfo:
    endpoint_id: int
    name: str  # "instance.port"
    direction: str  # "from_host" | "to_host"
    type: EsiType
    chunk_size: int | None
    node_id: int


@dataclass
class FabricGraph:
    name: str
    domains: dict[str, int]  # name -> period, document order
    nodes: list[FabricNode] = field(default_factory=list)
    edges: list[FabricEdge] = field(default_factory=list)
    connections: list[ConnectionMeta] = field(default_factory=list)
    endpoints: list[EndpointInfo] = field(default_factory=list)

    def add_node(self, kind: str, name: str, domain: str, params: dict) -> FabricNode:
        node = FabricNode(len(self.nodes), kind, name, domain, params)
        self.nodes.append(node)
        return node

    def add_edge(
        self,
        src: tuple[int, str],
        dst: tuple[int, str],
        etype: EsiType | None,
        width: int,
        domain: str,
        connection: int | None = None,
    ) -> FabricEdge:
        edge = FabricEdge(len(self.edges), src, dst, etype, width, domain, connection)
        self.edges.append(edge)
        return edge


def elaborate(d: SystemDesc) -> FabricGraph:
    """Lower a description to a fabric graph; check() must be clean."""
    diags = check(d)
    if diags:
        raise UncheckedDesignError(diags)

    g = FabricGraph(name=d.name, domains={k.name: k.period for k in d.clocks})
    actor_node: dict[str, FabricNode] = {}
    endpoint_node: dict[tuple[str, str], FabricNode] = {}

    for inst in d.instances:
        mod = d.module(inst.module)
        if mod.behavior == "host_endpoint":
            for port in mod.ports:
                direction = "from_host" if port.direction == "out" else "to_host"
                node = g.add_node(
                    "cosim_endpoint",
                    f"{inst.name}.{port.name}",
                    inst.clock,
                    {
                        "endpoint": f"{inst.name}.{port.name}",
                        "direction": direction,
                        "type": print_type(port.type),
                        "chunk_size": port.chunk_size,
                        "width": port_width(port),
                    },
                )
                endpoint_node[(inst.name, port.name)] = node
        elif mod.behavior == "fork":
            ins = [p for p in mod.ports if p.direction == "in"]
            outs = [p for p in mod.ports if p.direction == "out"]
            actor_node[inst.name] = g.add_node(
                "fork",
                inst.name,
                inst.clock,
                {
                    "n": len(outs),
                    "in_port": ins[0].name,
                    "out_ports": [p.name for p in outs],
                    "type": print_type(ins[0].type),
                },
            )
        else:
            actor_node[inst.name] = g.add_node(
                "actor",
                inst.name,
                inst.clock,
                {
                    "module": mod.name,
                    "behavior": mod.behavior,
                    "ports": [
                        {
                            "name": p.name,
                            "dir": p.direction,
                            "type": print_type(p.type),
                            "chunk_size": p.chunk_size,
                        }
                        for p in mod.ports
                    ],
                },
            )

    def producer_of(ep: tuple[str, str]) -> tuple[int, str]:
        if ep in endpoint_node:
            return endpoint_node[ep].id, "out"
        return actor_node[ep[0]].id, ep[1]

    def consumer_of(ep: tuple[str, str]) -> tuple[int, str]:
        if ep in endpoint_node:
            return endpoint_node[ep].id, "in"
        return actor_node[ep[0]].id, ep[1]

    for i, conn in enumerate(d.connections):
        src_port = d.port_of(*conn.src)
        dst_port = d.port_of(*conn.dst)
        src_dom = d.instance(conn.src[0]).clock
        dst_dom = d.instance(conn.dst[0]).clock
        w_src, w_dst = port_width(src_port), port_width(dst_port)
        etype = src_port.type

        cur = producer_of(conn.src)
        cur_width, cur_dom = w_src, src_dom
        first_edge = None
        has_repacker = False

        def hop(dst_ref, width, domain):
            nonlocal first_edge
            e = g.add_edge(cur, dst_ref, etype, width, domain, connection=i)
            if first_edge is None:
                first_edge = e.id
            return e

        if isinstance(etype, ListType) and w_src != w_dst:
            has_repacker = True
            rp = g.add_node(
                "repacker",
                f"conn{i}.repack",
                src_dom,
                {
                    "w_in": w_src,
                    "w_out": w_dst,
                    "elem_width": bit_width(etype.element),
                },
            )
            hop((rp.id, "in"), w_src, src_dom)
            cur, cur_width = (rp.id, "out"), w_dst

        for s in range(conn.buffer_stages):
            st = g.add_node("buffer_stage", f"conn{i}.stage{s}", src_dom, {})
            hop((st.id, "in"), cur_width, src_dom)
            cur = (st.id, "out")

        if src_dom != dst_dom:
            fifo = g.add_node(
                "cdc_fifo",
                f"conn{i}.cdc",
                dst_dom,
                {
                    "depth": CDC_DEFAULT_DEPTH,
                    "from_domain": src_dom,
                    "to_domain": dst_dom,
                },
            )
            hop((fifo.id, "in"), cur_width, src_dom)
            cur, cur_dom = (fifo.id, "out"), dst_dom

        last = hop(consumer_of(conn.dst), cur_width, cur_dom)

        monitor_id = None
        if conn.monitored:
            mon = g.add_node(
                "monitor",
                f"conn{i}.monitor",
                cur_dom,
                {"connection": i, "edge": last.id},
            )
            monitor_id = mon.id

        g.connections.append(
            ConnectionMeta(
                index=i,
                src=f"{conn.src[0]}.{conn.src[1]}",
                dst=f"{conn.dst[0]}.{conn.dst[1]}",
                stages=conn.buffer_stages,
                monitored=conn.monitored,
                first_edge=first_edge,
                last_edge=last.id,
                capacity_beats=2 * conn.buffer_stages
                + (CDC_DEFAULT_DEPTH if src_dom != dst_dom else 0)
                + (2 if has_repacker else 0)
                + 2,
                monitor_node=monitor_id,
            )
        )

    for svc in d.services:
        binds = [b for b in d.bindings if b.service == svc.name]
        if svc.kind == "host_comm" or not binds:
            continue
        n = len(binds)
        tbits = tag_width(n)
        widths = [port_width(d.port_of(b.instance, b.port)) for b in binds]
        w_mux = tbits + max(widths)
        svc_dom = d.instance(binds[0].instance).clock
        clients = [f"{b.instance}.{b.port}" for b in binds]
        mux = g.add_node(
            "service_mux",
            f"svc.{svc.name}.mux",
            svc_dom,
            {"n": n, "tag_bits": tbits, "payload_width": max(widths),
             "service": svc.name, "clients": clients},
        )
        for ci, b in enumerate(binds):
            port = d.port_of(b.instance, b.port)
            cdom = d.instance(b.instance).clock
            cur = producer_of((b.instance, b.port))
            if cdom != svc_dom:
                fifo = g.add_node(
                    "cdc_fifo",
                    f"svc.{svc.name}.cdc{ci}",
                    svc_dom,
                    {"depth": CDC_DEFAULT_DEPTH, "from_domain": cdom,
                     "to_domain": svc_dom},
                )
                g.add_edge(cur, (fifo.id, "in"), port.type, widths[ci], cdom)
                cur = (fifo.id, "out")
            g.add_edge(cur, (mux.id, f"in{ci}"), port.type, widths[ci], svc_dom)
        if svc.kind == "telemetry":
            ser = g.add_node(
                "telemetry_serializer",
                f"svc.{svc.name}.serializer",
                svc_dom,
                {"out_width": svc.out_width, "in_width": w_mux,
                 "service": svc.name},
            )
            g.add_edge((mux.id, "out"), (ser.id, "in"), None, w_mux, svc_dom)
        else:  # assertion
            sink = g.add_node(
                "actor",
                f"svc.{svc.name}.sink",
                svc_dom,
                {
                    "module": "",
                    "behavior": "assertion_sink",
                    "service": svc.name,
                    "tag_bits": tbits,
                    "clients": clients,
                    "ports": [
                        {"name": "in", "dir": "in", "type": f"uint{w_mux}",
                         "chunk_size": None}
                    ],
                },
            )
            g.add_edge((mux.id, "out"), (sink.id, "in"), None, w_mux, svc_dom)

    # host endpoints in binding document order; ids dense from zero
    for b in d.bindings:
        svc = d.service(b.service)
        if svc is None or svc.kind != "host_comm":
            continue
        node = endpoint_node[(b.instance, b.port)]
        port = d.port_of(b.instance, b.port)
        g.endpoints.append(
            EndpointInfo(
                endpoint_id=len(g.endpoints),
                name=node.params["endpoint"],
                direction=node.params["direction"],
                type=port.type,
                chunk_size=port.chunk_size,
                node_id=node.id,
            )
        )

    validate_graph(g)
    return g


def validate_graph(g: FabricGraph) -> None:
    """Structural invariants; raises EsiError on the first violation."""
    for i, node in enumerate(g.nodes):
        if node.id != i:
            raise EsiError(f"node ids not dense at {i}")
        if node.kind != "monitor" and node.domain not in g.domains:
            raise EsiError(f"node {node.name} in unknown domain {node.domain}")
    in_seen: set[tuple[int, str]] = set()
    out_seen: set[tuple[int, str]] = set()
    for i, edge in enumerate(g.edges):
        if edge.id != i:
            raise EsiError(f"edge ids not dense at {i}")
        src_node = g.nodes[edge.src[0]]
        dst_node = g.nodes[edge.dst[0]]
        if edge.src[1] not in src_node.out_port_names():
            raise EsiError(f"edge {i}: {src_node.name} has no out port {edge.src[1]}")
        if edge.dst[1] not in dst_node.in_port_names():
            raise EsiError(f"edge {i}: {dst_node.name} has no in port {edge.dst[1]}")
        if edge.src in out_seen:
            raise EsiError(f"edge {i}: out port {edge.src} already driven")
        if edge.dst in in_seen:
            raise EsiError(f"edge {i}: in port {edge.dst} already consumed")
        out_seen.add(edge.src)
        in_seen.add(edge.dst)
        if edge.type is not None:
            if isinstance(edge.type, ListType):
                ew = bit_width(edge.type.element)
                if edge.width < ew or edge.width % ew:
                    raise EsiError(
                        f"edge {i}: width {edge.width} is not a whole number "
                        f"of {ew}-bit elements"
                    )
            elif edge.width != bit_width(edge.type):
                raise EsiError(
                    f"edge {i}: width {edge.width} != bit_width "
                    f"{bit_width(edge.type)}"
                )
        if edge.width < 1:
            raise EsiError(f"edge {i}: width must be >= 1")

        def edge_domain_ok(node: FabricNode, expect_from: bool) -> bool:
            if node.kind == "cdc_fifo":
                key = "to_domain" if expect_from else "from_domain"
                return edge.domain == node.params[key]
            return edge.domain == node.domain

        if not edge_domain_ok(src_node, expect_from=True):
            raise EsiError(f"edge {i}: domain {edge.domain} != producer domain")
        if not edge_domain_ok(dst_node, expect_from=False):
            raise EsiError(f"edge {i}: domain {edge.domain} != consumer domain")
    for node in g.nodes:
        if node.kind == "monitor":
            e = node.params["edge"]
            if not 0 <= e < len(g.edges):
                raise EsiError(f"monitor {node.name} taps unknown edge {e}")


def fabric_stats(g: FabricGraph) -> dict:
    """Deterministic node/edge summary of an elaborated graph."""
    kinds: dict[str, int] = {}
    for node in g.nodes:
        kinds[node.kind] = kinds.get(node.kind, 0) + 1
    return {
        "nodes": dict(sorted(kinds.items())),
        "node_count": len(g.nodes),
        "edge_count": len(g.edges),
        "total_edge_bits": sum(e.width for e in g.edges),
        "max_path_stages": max((c.stages for c in g.connections), default=0),
    }


def _node_note(node: FabricNode) -> str:
    p = node.params
    if node.kind == "repacker":
        return f" {p['w_in']}b>{p['w_out']}b"
    if node.kind == "cdc_fifo":
        return f" depth={p['depth']}"
    if node.kind == "telemetry_serializer":
        return f" {p['in_width']}b>{p['out_width']}b"
    if node.kind == "service_mux":
        return f" n={p['n']}"
    if node.kind == "cosim_endpoint":
        return f" {p['direction']} w={p['width']}"
    return ""


def emit_dot(g: FabricGraph) -> str:
    """Graphviz rendering; labels carry kinds and widths, stable ordering."""
    lines = [f'digraph "{g.name}" {{', "  rankdir=LR;"]
    for node in g.nodes:
        label = f"{node.name}\\n{node.kind}{_node_note(node)}"
        shape = "box" if node.kind == "actor" else "ellipse"
        lines.append(f'  n{node.id} [label="{label}", shape={shape}];')
    for edge in g.edges:
        tname = print_type(edge.type) if edge.type is not None else "raw"
        lines.append(
            f'  n{edge.src[0]} -> n{edge.dst[0]} '
            f'[label="{tname} w={edge.width}"];'
        )
    for node in g.nodes:
        if node.kind == "monitor":
            tapped = g.edges[node.params["edge"]]
            lines.append(
                f"  n{node.id} -> n{tapped.dst[0]} [style=dashed, arrowhead=none];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: FabricGraph) -> dict:
    return {
        "version": GRAPH_SCHEMA_VERSION,
        "name": g.name,
        "domains": [{"name": n, "period": p} for n, p in g.domains.items()],
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind,
                "name": n.name,
                "domain": n.domain,
                "params": n.params,
            }
            for n in g.nodes
        ],
        "edges": [
            {
                "id": e.id,
                "from": [e.src[0], e.src[1]],
                "to": [e.dst[0], e.dst[1]],
                "type": print_type(e.type) if e.type is not None else None,
                "width": e.width,
                "domain": e.domain,
                "connection": e.connection,
            }
            for e in g.edges
        ],
        "connections": [
            {
                "index": c.index,
                "from": c.src,
                "to": c.dst,
                "stages": c.stages,
                "monitored": c.monitored,
                "first_edge": c.first_edge,
                "last_edge": c.last_edge,
                "capacity_beats": c.capacity_beats,
                "monitor_node": c.monitor_node,
            }
            for c in g.connections
        ],
        "endpoints": [
            {
                "endpoint_id": ep.endpoint_id,
                "name": ep.name,
                "direction": ep.direction,
                "type": print_type(ep.type),
                "chunk_size": ep.chunk_size,
                "node_id": ep.node_id,
            }
            for ep in g.endpoints
        ],
    }


def graph_from_json(doc: dict) -> FabricGraph:
    if doc.get("version") != GRAPH_SCHEMA_VERSION:
        raise EsiError(f"unsupported fabric graph version {doc.get('version')!r}")
    g = FabricGraph(
        name=doc["name"],
        domains={d["name"]: d["period"] for d in doc["domains"]},
    )
    for n in doc["nodes"]:
        g.nodes.append(
            FabricNode(n["id"], n["kind"], n["name"], n["domain"], n["params"])
        )
    for e in doc["edges"]:
        g.edges.append(
            FabricEdge(
                e["id"],
                (e["from"][0], e["from"][1]),
                (e["to"][0], e["to"][1]),
                parse_type(e["type"]) if e["type"] is not None else None,
                e["width"],
                e["domain"],
                e["connection"],
            )
        )
    for cnode in doc["connections"]:
        g.connections.append(
            ConnectionMeta(
                index=cnode["index"],
                src=cnode["from"],
                dst=cnode["to"],
                stages=cnode["stages"],
                monitored=cnode["monitored"],
                first_edge=cnode["first_edge"],
                last_edge=cnode["last_edge"],
                capacity_beats=cnode["capacity_beats"],
                monitor_node=cnode["monitor_node"],
            )
        )
    for ep in doc["endpoints"]:
        g.endpoints.append(
            EndpointInfo(
                endpoint_id=ep["endpoint_id"],
                name=ep["name"],
                direction=ep["direction"],
                type=parse_type(ep["type"]),
                chunk_size=ep["chunk_size"],
                node_id=ep["node_id"],
            )
        )
    validate_graph(g)
    return g
