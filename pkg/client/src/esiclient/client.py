"""Typed endpoint handles over a cosim connection.

connect() performs the HELLO exchange, checks the protocol version,
verifies every manifest type against its server-reported identifier, and
builds one EndpointHandle per endpoint. Handles validate values against
their type before a single frame leaves the process.

One Client per connection; callers serialize access (no internal locks).
"""

from __future__ import annotations

import json
import socket
import struct
import time

from .codec import decode, encode
from .errors import (
    DirectionError,
    ProtocolError,
    VersionMismatchError,
)
from .protocol import (
    OP_HELLO,
    OP_RECV_REQ,
    OP_RECV_RESP,
    OP_SEND,
    OP_SHUTDOWN,
    OP_STATS_REQ,
    OP_STATS_RESP,
    PROTOCOL_VERSION,
    FrameSocket,
)
from .types import TypeDesc, parse_type, type_id


class EndpointHandle:
    """Typed view of one host-visible endpoint."""

    def __init__(self, client: "Client", endpoint_id: int, name: str,
                 direction: str, type_text: str, type_desc: TypeDesc):
        self._client = client
        self.endpoint_id = endpoint_id
        self.name = name
        self.direction = direction
        self.type_text = type_text
        self.type = type_desc

    def __repr__(self) -> str:
        return (
            f"EndpointHandle({self.name!r}, {self.direction}, "
            f"{self.type_text})"
        )

    def send(self, value) -> None:
        """Validate, encode, and queue one message into the design."""
        if self.direction != "from_host":
            raise DirectionError(f"{self.name} is not writable from the host")
        payload = encode(value, self.type)  # raises ShapeError before any I/O
        self._client._frames.send(
            OP_SEND, struct.pack("<I", self.endpoint_id) + payload
        )

    def recv(self, timeout: float | None = 1.0, poll_interval: float = 0.002):
        """Next message from the design, or None once timeout expires.

        timeout=None polls forever; timeout=0 polls exactly once.
        """
        if self.direction != "to_host":
            raise DirectionError(f"{self.name} does not produce host data")
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            raw = self._client._request_recv(self.endpoint_id)
            if raw is not None:
                return decode(raw, self.type)
            if deadline is not None and time.monotonic() >= deadline:
                return None
            time.sleep(poll_interval)


class Client:
    def __init__(self, frames: FrameSocket, design: str,
                 endpoints: dict[str, EndpointHandle]):
        self._frames = frames
        self.design = design
        self.endpoints = endpoints

    def __enter__(self) -> "Client":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __getitem__(self, name: str) -> EndpointHandle:
        return self.endpoints[name]

    def _request_recv(self, endpoint_id: int) -> bytes | None:
        self._frames.send(OP_RECV_REQ, struct.pack("<I", endpoint_id))
        payload = self._frames.expect(OP_RECV_RESP)
        if len(payload) < 5:
            raise ProtocolError("short RECV_RESP payload")
        (eid,) = struct.unpack_from("<I", payload)
        if eid != endpoint_id:
            raise ProtocolError(f"RECV_RESP for endpoint {eid}, wanted {endpoint_id}")
        return payload[5:] if payload[4] else None

    def stats(self) -> dict:
        """The server's current monitor report."""
        self._frames.send(OP_STATS_REQ)
        return json.loads(self._frames.expect(OP_STATS_RESP))

    def shutdown(self) -> None:
        """Stop the server, wait for its acknowledgement, and close."""
        self._frames.send(OP_SHUTDOWN)
        self._frames.expect(OP_SHUTDOWN)
        self.close()

    def close(self) -> None:
        self._frames.close()


def connect(host: str = "127.0.0.1", port: int = 7643,
            timeout: float = 10.0) -> Client:
    """Dial a cosim server and build typed handles from its manifest."""
    sock = socket.create_connection((host, port), timeout=timeout)
    frames = FrameSocket(sock)
    try:
        payload = frames.expect(OP_HELLO)
        if len(payload) < 4:
            raise ProtocolError("short HELLO payload")
        (version,) = struct.unpack_from("<I", payload)
        if version != PROTOCOL_VERSION:
            raise VersionMismatchError(
                f"server speaks protocol {version}, client speaks "
                f"{PROTOCOL_VERSION}"
            )
        try:
            manifest = json.loads(payload[4:])
            design = manifest["design"]
            raw_endpoints = manifest["endpoints"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed manifest: {exc}") from exc
        if manifest.get("protocol_version") != version:
            raise ProtocolError("manifest and HELLO disagree on the version")
        client = Client(frames, design, {})
        for entry in raw_endpoints:
            text = entry["type"]
            desc = parse_type(text)
            if type_id(text) != entry["type_id"]:
                raise ProtocolError(
                    f"type identifier mismatch for {entry['name']!r}"
                )
            handle = EndpointHandle(
                client, entry["endpoint_id"], entry["name"],
                entry["direction"], text, desc,
            )
            client.endpoints[handle.name] = handle
        return client
    except Exception:
        sock.close()
        raise
