"""Language server session management: spawn, handshake, requests."""

from __future__ import annotations

import logging
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import unquote, urlparse
from urllib.request import pathname2url

from .errors import HandshakeTimeout, ProtocolError, RequestTimeout, SpawnFailure
from .rpc import RpcConnection

logger = logging.getLogger(__name__)


@dataclass
class LspServerConfig:
    """How to launch and talk to one language server.

    The child process runs with the project root as its working
    directory, so relative arguments in the launch command resolve
    against the project being analyzed.
    """

    language: str
    launch_command: list[str]
    root_path: str | Path = "."
    initialization_options: dict = field(default_factory=dict)
    request_timeout: float = 30.0

    def validate(self) -> None:
        if not self.launch_command:
            raise ValueError("launch_command must be non-empty")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive")


def path_to_uri(path: str | Path) -> str:
    return "file://" + pathname2url(str(Path(path).resolve()))


def uri_to_path(uri: str) -> Path:
    return Path(unquote(urlparse(uri).path))


class Session:
    """One initialized server process with its recorded capabilities."""

    def __init__(self, config: LspServerConfig, process: subprocess.Popen, rpc: RpcConnection, capabilities: dict):
        self.config = config
        self.root = Path(config.root_path).resolve()
        self._process = process
        self._rpc = rpc
        self.capabilities = capabilities

    def request(self, method: str, params, timeout: float | None = None):
        return self._rpc.request(method, params, timeout or self.config.request_timeout)

    def notify(self, method: str, params) -> None:
        self._rpc.notify(method, params)

    def uri_for(self, rel_path: str) -> str:
        return path_to_uri(self.root / rel_path)

    def open_document(self, rel_path: str, text: str) -> None:
        self.notify(
            "textDocument/didOpen",
            {
                "textDocument": {
                    "uri": self.uri_for(rel_path),
                    "languageId": self.config.language,
                    "version": 1,
                    "text": text,
                }
            },
        )

    def close(self) -> None:
        try:
            self.request("shutdown", None, timeout=2.0)
            self.notify("exit", None)
        except (ProtocolError, RequestTimeout):
            pass
        try:
            self._process.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._process.kill()
            self._process.wait(timeout=2.0)

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def start_session(config: LspServerConfig) -> Session:
    """Spawn the server and complete the initialize handshake.

    Raises SpawnFailure when the command cannot start, HandshakeTimeout
    when initialize goes unanswered within the configured timeout, and
    ProtocolError on malformed framing.
    """
    config.validate()
    root = Path(config.root_path).resolve()
    try:
        process = subprocess.Popen(
            config.launch_command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            cwd=root if root.is_dir() else None,
        )
    except (OSError, ValueError) as exc:
        raise SpawnFailure(f"could not start {config.launch_command!r}: {exc}") from exc

    rpc = RpcConnection(process.stdin, process.stdout)
    params = {
        "processId": os.getpid(),
        "rootUri": path_to_uri(root),
        "rootPath": str(root),
        "capabilities": {},
        "initializationOptions": config.initialization_options,
    }
    try:
        result = rpc.request("initialize", params, config.request_timeout)
    except RequestTimeout as exc:
        process.kill()
        raise HandshakeTimeout(f"initialize unanswered after {config.request_timeout}s") from exc
    except ProtocolError:
        process.kill()
        raise

    rpc.notify("initialized", {})
    capabilities = result.get("capabilities", {}) if isinstance(result, dict) else {}
    return Session(config, process, rpc, capabilities)
