"""Host-communication service: typed endpoints over a framed TCP protocol.

Frame layout (all integers little-endian):

    u32 length          covers opcode + payload
    u8  opcode
    ... payload

Opcodes:

    0x01 HELLO      server -> client on connect: u32 protocol version,
                    then the endpoint manifest as UTF-8 JSON
    0x02 SEND       u32 endpoint_id + message bytes (wire serialization;
                    lists carry their 32-bit count header, byte-padded)
    0x03 RECV_REQ   u32 endpoint_id
    0x04 RECV_RESP  u32 endpoint_id + u8 present + message bytes if present
    0x05 STATS_REQ  empty
    0x06 STATS_RESP monitor report as UTF-8 JSON
    0x0F SHUTDOWN   empty; server acknowledges with 0x0F and stops
    0x7F ERROR      u16 code + UTF-8 text

Error codes: 1 malformed frame, 2 unknown opcode, 3 unknown endpoint,
4 type/length mismatch, 5 mailbox full. Unknown opcodes keep the
connection open; an unrecoverable length field closes it.

The simulation advances in the background between protocol turns
(ticks_per_iter per service-loop iteration). Host-injected messages
enter the fabric at the next tick their endpoint can offer them, through
bounded per-endpoint mailboxes, so the sequence of delivered payloads
depends only on (design, config, client script), never on frame timing.
"""

from __future__ import annotations

import json
import selectors
import socket
import struct
from dataclasses import dataclass

from .errors import BitLengthError, NonzeroPadError, ProtocolError
from .fabric import FabricGraph
from .sim import ActorBehavior, ActorContext, Engine, SimConfig, monitor_report
from .types import ListType, print_type, type_id
from .wire import BitString, message_bit_length

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7643
DEFAULT_FRAME_CAP = 1 << 24

OP_HELLO = 0x01
OP_SEND = 0x02
OP_RECV_REQ = 0x03
OP_RECV_RESP = 0x04
OP_STATS_REQ = 0x05
OP_STATS_RESP = 0x06
OP_SHUTDOWN = 0x0F
OP_ERROR = 0x7F

ERR_MALFORMED = 1
ERR_UNKNOWN_OPCODE = 2
ERR_UNKNOWN_ENDPOINT = 3
ERR_LENGTH = 4
ERR_MAILBOX_FULL = 5


@dataclass(frozen=True)
class ManifestEntry:
    endpoint_id: int
    name: str
    direction: str  # "to_host" | "from_host"
    type_text: str
    type_id: int


@dataclass(frozen=True)
class EndpointManifest:
    protocol_version: int
    design: str
    endpoints: tuple[ManifestEntry, ...]


def manifest(graph: FabricGraph) -> EndpointManifest:
    """Typed endpoint catalog; ids dense in binding document order."""
    entries = []
    for ep in graph.endpoints:
        entries.append(
            ManifestEntry(
                endpoint_id=ep.endpoint_id,
                name=ep.name,
                direction=ep.direction,
                type_text=print_type(ep.type),
                type_id=type_id(ep.type),
            )
        )
    return EndpointManifest(PROTOCOL_VERSION, graph.name, tuple(entries))


def manifest_to_json(m: EndpointManifest) -> dict:
    return {
        "protocol_version": m.protocol_version,
        "design": m.design,
        "endpoints": [
            {
                "endpoint_id": e.endpoint_id,
                "name": e.name,
                "direction": e.direction,
                "type": e.type_text,
                "type_id": e.type_id,
            }
            for e in m.endpoints
        ],
    }


def manifest_from_json(doc: dict) -> EndpointManifest:
    try:
        return EndpointManifest(
            protocol_version=doc["protocol_version"],
            design=doc["design"],
            endpoints=tuple(
                ManifestEntry(
                    endpoint_id=e["endpoint_id"],
                    name=e["name"],
                    direction=e["direction"],
                    type_text=e["type"],
                    type_id=e["type_id"],
                )
                for e in doc["endpoints"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed manifest: {exc}") from exc


def pack_frame(opcode: int, payload: bytes = b"") -> bytes:
    return struct.pack("<I", 1 + len(payload)) + bytes([opcode]) + payload


def error_frame(code: int, text: str) -> bytes:
    return pack_frame(OP_ERROR, struct.pack("<H", code) + text.encode("utf-8"))


class _DiscardSink(ActorBehavior):
    """Server-side default for sink actors: consume and count."""

    def __init__(self):
        self.count = 0

    def step(self, ctx: ActorContext) -> None:
        for port in ctx.in_ports:
            if ctx.available(port):
                ctx.consume(port)
                self.count += 1


class _Session:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.rx = bytearray()
        self.tx = bytearray()
        self.closing = False


class CosimServer:
    """Serves one elaborated design to any number of TCP clients.

    Single-threaded: the service loop alternates between socket work and
    engine stepping, so all simulator access is serialized. serve()
    blocks until a SHUTDOWN frame arrives or request_shutdown() is
    called from another thread.
    """

    def __init__(
        self,
        graph: FabricGraph,
        config: SimConfig | None = None,
        behaviors=None,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        ticks_per_iter: int = 1024,
        frame_cap: int = DEFAULT_FRAME_CAP,
    ):
        if config is None:
            config = SimConfig(record_trace=False)
        behaviors = dict(behaviors or {})
        for node in graph.nodes:
            if (
                node.kind == "actor"
                and node.params.get("behavior") == "sink"
                and node.name not in behaviors
            ):
                behaviors[node.name] = _DiscardSink()
        self.engine = Engine(graph, config, behaviors)
        self.graph = graph
        self.manifest = manifest(graph)
        self._hello = pack_frame(
            OP_HELLO,
            struct.pack("<I", PROTOCOL_VERSION)
            + json.dumps(manifest_to_json(self.manifest), sort_keys=True).encode(),
        )
        self.ticks_per_iter = ticks_per_iter
        self.frame_cap = frame_cap
        self._stop = False
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen()
        self._listener.setblocking(False)
        self.address = self._listener.getsockname()

    def request_shutdown(self) -> None:
        self._stop = True

    def serve(self) -> None:
        sel = selectors.DefaultSelector()
        sel.register(self._listener, selectors.EVENT_READ, None)
        sessions: dict[socket.socket, _Session] = {}
        try:
            while not self._stop:
                for key, events in sel.select(timeout=0.001):
                    if key.data is None:
                        self._accept(sel, sessions)
                        continue
                    session: _Session = key.data
                    if events & selectors.EVENT_READ:
                        self._read(sel, sessions, session)
                    if events & selectors.EVENT_WRITE and session.sock in sessions:
                        self._flush(sel, sessions, session)
                self.engine.step(self.ticks_per_iter)
        finally:
            for session in list(sessions.values()):
                self._drop(sel, sessions, session)
            sel.unregister(self._listener)
            self._listener.close()
            sel.close()

    # -- socket plumbing --

    def _accept(self, sel, sessions) -> None:
        try:
            sock, _ = self._listener.accept()
        except OSError:
            return
        sock.setblocking(False)
        session = _Session(sock)
        sessions[sock] = session
        sel.register(sock, selectors.EVENT_READ, session)
        self._queue(sel, session, self._hello)

    def _drop(self, sel, sessions, session) -> None:
        if session.sock in sessions:
            del sessions[session.sock]
            try:
                sel.unregister(session.sock)
            except (KeyError, ValueError):
                pass
            session.sock.close()

    def _queue(self, sel, session, data: bytes) -> None:
        session.tx.extend(data)
        self._try_send(sel, session)

    def _try_send(self, sel, session) -> None:
        if session.tx:
            try:
                sent = session.sock.send(bytes(session.tx))
                del session.tx[:sent]
            except BlockingIOError:
                pass
            except OSError:
                session.tx.clear()
                session.closing = True
        mask = selectors.EVENT_READ
        if session.tx:
            mask |= selectors.EVENT_WRITE
        try:
            sel.modify(session.sock, mask, session)
        except (KeyError, ValueError):
            pass

    def _flush(self, sel, sessions, session) -> None:
        self._try_send(sel, session)
        if session.closing and not session.tx:
            self._drop(sel, sessions, session)

    def _read(self, sel, sessions, session) -> None:
        try:
            data = session.sock.recv(65536)
        except BlockingIOError:
            return
        except OSError:
            self._drop(sel, sessions, session)
            return
        if not data:
            self._drop(sel, sessions, session)
            return
        session.rx.extend(data)
        while True:
            if len(session.rx) < 4:
                return
            (length,) = struct.unpack_from("<I", session.rx)
            if length < 1 or length > self.frame_cap:
                self._queue(
                    sel, session,
                    error_frame(ERR_MALFORMED, f"frame length {length} invalid"),
                )
                session.closing = True
                self._flush(sel, sessions, session)
                return
            if len(session.rx) < 4 + length:
                return
            opcode = session.rx[4]
            payload = bytes(session.rx[5 : 4 + length])
            del session.rx[: 4 + length]
            self._dispatch(sel, sessions, session, opcode, payload)
            if session.sock not in sessions or self._stop:
                return

    # -- protocol handlers --

    def _dispatch(self, sel, sessions, session, opcode: int, payload: bytes) -> None:
        if opcode == OP_SEND:
            reply = self._handle_send(payload)
        elif opcode == OP_RECV_REQ:
            reply = self._handle_recv(payload)
        elif opcode == OP_STATS_REQ:
            report = monitor_report(self.engine.result(), self.graph)
            reply = pack_frame(
                OP_STATS_RESP, json.dumps(report, sort_keys=True).encode()
            )
        elif opcode == OP_SHUTDOWN:
            self._queue(sel, session, pack_frame(OP_SHUTDOWN))
            session.closing = True
            self._flush(sel, sessions, session)
            self._stop = True
            return
        else:
            reply = error_frame(ERR_UNKNOWN_OPCODE, f"unknown opcode 0x{opcode:02x}")
        if reply:
            self._queue(sel, session, reply)

    def _endpoint(self, payload: bytes, direction: str) -> tuple:
        if len(payload) < 4:
            return None, error_frame(ERR_MALFORMED, "endpoint id missing")
        (eid,) = struct.unpack_from("<I", payload)
        if eid >= len(self.manifest.endpoints):
            return None, error_frame(ERR_UNKNOWN_ENDPOINT, f"no endpoint {eid}")
        info = self.graph.endpoints[eid]
        if info.direction != direction:
            return None, error_frame(
                ERR_UNKNOWN_ENDPOINT, f"endpoint {eid} is not {direction}"
            )
        return info, None

    def _handle_send(self, payload: bytes) -> bytes:
        info, err = self._endpoint(payload, "from_host")
        if err:
            return err
        body = payload[4:]
        if isinstance(info.type, ListType) and len(body) < 4:
            return error_frame(ERR_LENGTH, "list message shorter than its header")
        nbits = message_bit_length(info.type, body)
        expected = (nbits + 7) // 8
        if len(body) != expected:
            return error_frame(
                ERR_LENGTH,
                f"endpoint {info.endpoint_id} expects {expected} bytes, "
                f"got {len(body)}",
            )
        try:
            bits = BitString.from_bytes(body, nbits)
        except (NonzeroPadError, BitLengthError):
            return error_frame(ERR_LENGTH, "padding bits must be zero")
        if not self.engine.inject(info.name, bits):
            return error_frame(
                ERR_MAILBOX_FULL, f"endpoint {info.endpoint_id} mailbox full"
            )
        return b""

    def _handle_recv(self, payload: bytes) -> bytes:
        info, err = self._endpoint(payload, "to_host")
        if err:
            return err
        message = self.engine.drain(info.name)
        head = struct.pack("<I", info.endpoint_id)
        if message is None:
            return pack_frame(OP_RECV_RESP, head + b"\x00")
        return pack_frame(OP_RECV_RESP, head + b"\x01" + message)


def serve(
    graph: FabricGraph,
    config: SimConfig | None = None,
    behaviors=None,
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    ticks_per_iter: int = 1024,
) -> None:
    """Blocking convenience wrapper around CosimServer."""
    CosimServer(
        graph, config, behaviors, host=host, port=port,
        ticks_per_iter=ticks_per_iter,
    ).serve()
