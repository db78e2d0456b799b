"""Frame-level plumbing for the cosim TCP protocol.

Frames are u32 little-endian length (opcode + payload), u8 opcode,
payload. See the server's README for the opcode table.
"""

from __future__ import annotations

import socket
import struct

from .errors import ProtocolError, ServerError

PROTOCOL_VERSION = 1

OP_HELLO = 0x01
OP_SEND = 0x02
OP_RECV_REQ = 0x03
OP_RECV_RESP = 0x04
OP_STATS_REQ = 0x05
OP_STATS_RESP = 0x06
OP_SHUTDOWN = 0x0F
OP_ERROR = 0x7F

MAX_FRAME = 1 << 24


def pack_frame(opcode: int, payload: bytes = b"") -> bytes:
    return struct.pack("<I", 1 + len(payload)) + bytes([opcode]) + payload


class FrameSocket:
    """Blocking framed connection with an internal receive buffer."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = bytearray()

    def close(self) -> None:
        self._sock.close()

    def send(self, opcode: int, payload: bytes = b"") -> None:
        self._sock.sendall(pack_frame(opcode, payload))

    def read_frame(self) -> tuple[int, bytes]:
        while True:
            if len(self._buf) >= 4:
                (length,) = struct.unpack_from("<I", self._buf)
                if length < 1 or length > MAX_FRAME:
                    raise ProtocolError(f"invalid frame length {length}")
                if len(self._buf) >= 4 + length:
                    opcode = self._buf[4]
                    payload = bytes(self._buf[5 : 4 + length])
                    del self._buf[: 4 + length]
                    return opcode, payload
            chunk = self._sock.recv(65536)
            if not chunk:
                raise ProtocolError("server closed the connection")
            self._buf.extend(chunk)

    def expect(self, opcode: int) -> bytes:
        """Next frame's payload; ERROR frames become ServerError."""
        got, payload = self.read_frame()
        if got == OP_ERROR:
            if len(payload) < 2:
                raise ProtocolError("truncated ERROR frame")
            (code,) = struct.unpack_from("<H", payload)
            raise ServerError(code, payload[2:].decode("utf-8", "replace"))
        if got != opcode:
            raise ProtocolError(f"expected opcode 0x{opcode:02x}, got 0x{got:02x}")
        return payload
