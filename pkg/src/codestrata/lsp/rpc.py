"""JSON-RPC 2.0 over byte streams with Content-Length framing.

Every outgoing frame carries a Content-Length header equal to the UTF-8
byte length of its body. Writes are serialized under a lock; a reader
thread matches responses to requests by id, so callers on any thread
block only on their own reply and no ordering is assumed from the
server.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, BinaryIO

from .errors import ProtocolError, RequestTimeout, ServerError

logger = logging.getLogger(__name__)

_HEADER_SEP = b"\r\n"


def encode_frame(payload: dict) -> bytes:
    body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    return b"Content-Length: %d\r\n\r\n" % len(body) + body


def read_frame(stream: BinaryIO) -> dict | None:
    """Read one framed message; None at a clean EOF."""
    headers: dict[str, str] = {}
    saw_any = False
    while True:
        line = stream.readline()
        if not line:
            if saw_any:
                raise ProtocolError("stream ended inside a frame header")
            return None
        saw_any = True
        if line in (_HEADER_SEP, b"\n"):
            break
        try:
            key, value = line.decode("ascii").split(":", 1)
        except (UnicodeDecodeError, ValueError) as exc:
            raise ProtocolError(f"malformed header line: {line!r}") from exc
        headers[key.strip().lower()] = value.strip()

    try:
        length = int(headers["content-length"])
    except KeyError:
        raise ProtocolError("frame header is missing Content-Length") from None
    except ValueError as exc:
        raise ProtocolError(f"bad Content-Length: {headers['content-length']!r}") from exc

    body = b""
    while len(body) < length:
        chunk = stream.read(length - len(body))
        if not chunk:
            raise ProtocolError("stream ended inside a frame body")
        body += chunk
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame body is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("frame body must be a JSON object")
    return payload


@dataclass
class _Pending:
    event: threading.Event = field(default_factory=threading.Event)
    result: Any = None
    error: dict | None = None


class RpcConnection:
    """Pipelined request/response client over a pair of byte streams."""

    def __init__(self, writer: BinaryIO, reader: BinaryIO):
        self._writer = writer
        self._reader = reader
        self._write_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._pending: dict[int, _Pending] = {}
        self._next_id = 0
        self._dead: ProtocolError | None = None
        self._thread = threading.Thread(target=self._read_loop, daemon=True)
        self._thread.start()

    def _read_loop(self) -> None:
        try:
            while True:
                frame = read_frame(self._reader)
                if frame is None:
                    self._fail(ProtocolError("server closed the connection"))
                    return
                self._dispatch(frame)
        except ProtocolError as exc:
            self._fail(exc)
        except (OSError, ValueError) as exc:
            self._fail(ProtocolError(f"read failed: {exc}"))

    def _dispatch(self, frame: dict) -> None:
        if "method" in frame:
            if "id" in frame:
                # server-to-client request: answer with a null result so
                # well-behaved servers are not left waiting
                self._write({"jsonrpc": "2.0", "id": frame["id"], "result": None})
            else:
                logger.debug("notification from server: %s", frame.get("method"))
            return
        request_id = frame.get("id")
        with self._state_lock:
            pending = self._pending.pop(request_id, None)
        if pending is None:
            logger.debug("response for unknown request id %r", request_id)
            return
        if "error" in frame:
            pending.error = frame["error"]
        else:
            pending.result = frame.get("result")
        pending.event.set()

    def _fail(self, error: ProtocolError) -> None:
        with self._state_lock:
            self._dead = error
            pending = list(self._pending.values())
            self._pending.clear()
        for entry in pending:
            entry.error = {"code": -32700, "message": str(error), "_protocol": True}
            entry.event.set()

    def _write(self, payload: dict) -> None:
        data = encode_frame(payload)
        with self._write_lock:
            try:
                self._writer.write(data)
                self._writer.flush()
            except (OSError, ValueError) as exc:
                raise ProtocolError(f"write failed: {exc}") from exc

    def request(self, method: str, params: Any, timeout: float) -> Any:
        with self._state_lock:
            if self._dead is not None:
                raise ProtocolError(f"connection is down: {self._dead}")
            self._next_id += 1
            request_id = self._next_id
            pending = _Pending()
            self._pending[request_id] = pending
        self._write({"jsonrpc": "2.0", "id": request_id, "method": method, "params": params})
        if not pending.event.wait(timeout):
            with self._state_lock:
                self._pending.pop(request_id, None)
            raise RequestTimeout(f"no response to {method!r} within {timeout}s")
        if pending.error is not None:
            if pending.error.get("_protocol"):
                raise ProtocolError(pending.error.get("message", "protocol failure"))
            raise ServerError(
                pending.error.get("code", -32603),
                pending.error.get("message", "unknown error"),
                pending.error.get("data"),
            )
        return pending.result

    def notify(self, method: str, params: Any) -> None:
        self._write({"jsonrpc": "2.0", "method": method, "params": params})
