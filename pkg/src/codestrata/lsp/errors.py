"""Errors raised by the language server client."""

from __future__ import annotations


class LspError(Exception):
    pass


class SpawnFailure(LspError):
    """The language server process could not be started."""


class HandshakeTimeout(LspError):
    """The server never answered the initialize request in time."""


class ProtocolError(LspError):
    """Malformed JSON-RPC framing or a dead connection."""


class RequestTimeout(ProtocolError):
    """A non-handshake request went unanswered within the timeout."""


class ServerError(LspError):
    """An error response from the server, passed through verbatim."""

    def __init__(self, code: int, message: str, data=None):
        self.code = code
        self.message = message
        self.data = data
        super().__init__(f"server error {code}: {message}")
