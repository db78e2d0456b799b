"""Typed client SDK for the esic cosimulation protocol.

Handles are built dynamically from the server's endpoint manifest: no
code generation. Values are validated and encoded client-side with the
same bit-level rules the fabric uses, so a shape error never reaches the
wire.

    import esiclient

    with esiclient.connect("127.0.0.1", 7643) as client:
        client["s_from.out"].send({"a": 3, "b": 10})
        print(client["s_to.in"].recv(timeout=2.0))
"""

from .client import Client, EndpointHandle, connect
from .codec import decode, encode
from .errors import (
    ClientError,
    DirectionError,
    ProtocolError,
    ServerError,
    ShapeError,
    TypeTextError,
    VersionMismatchError,
)
from .types import TypeDesc, bit_width, parse_type, type_id

__version__ = "0.1.0"

__all__ = [
    "Client",
    "EndpointHandle",
    "connect",
    "encode",
    "decode",
    "parse_type",
    "bit_width",
    "type_id",
    "TypeDesc",
    "ClientError",
    "DirectionError",
    "ProtocolError",
    "ServerError",
    "ShapeError",
    "TypeTextError",
    "VersionMismatchError",
]
