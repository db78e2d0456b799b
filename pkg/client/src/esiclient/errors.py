"""Client-side exception types."""

from __future__ import annotations


class ClientError(Exception):
    """Base class for everything this SDK raises."""


class TypeTextError(ClientError):
    """A type string from the manifest (or a caller) does not parse."""


class ShapeError(ClientError):
    """A value does not match its endpoint's type; nothing was sent."""


class ProtocolError(ClientError):
    """The server sent something the protocol does not allow."""


class VersionMismatchError(ProtocolError):
    """Server speaks a different protocol version; no client is built."""


class DirectionError(ClientError):
    """send on a to_host handle, or recv on a from_host handle."""


class ServerError(ClientError):
    """An ERROR frame from the server."""

    def __init__(self, code: int, text: str):
        super().__init__(f"server error {code}: {text}")
        self.code = code
        self.text = text
