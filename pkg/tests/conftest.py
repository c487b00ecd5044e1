from __future__ import annotations

import json
import shutil
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from codestrata.config import RunConfig, config_from_dict, load_config
from codestrata.graph import CodeEdge, CodeGraph, CodeNode, build_graph

REPO_ROOT = Path(__file__).resolve().parent.parent
MINI_CORPUS = REPO_ROOT / "fixtures" / "mini_corpus"


def make_node(nid: str, *, kind: str = "function", file_path: str = "lib.toy", code: str | None = None) -> CodeNode:
    return CodeNode(
        id=nid,
        kind=kind,
        name=nid.split("::")[-1].split("@")[0],
        qualified_name=nid,
        file_path=file_path,
        span=(1, 3),
        language="toy",
        code=(f"fn {nid}() {{\n}}" if code is None else code) if kind not in ("file", "module") else "",
    )


def make_graph(ids: list[str], call_pairs: list[tuple[str, str]], **node_kwargs) -> CodeGraph:
    nodes = [make_node(nid, **node_kwargs) for nid in ids]
    edges = [CodeEdge(a, b, "call") for a, b in call_pairs]
    return build_graph(nodes, edges)


def random_digraph(rng, n: int, density: float, ensure_cycle: bool = False) -> CodeGraph:
    """Seeded random call graph over n function nodes.

    Without ensure_cycle the edges are oriented high-to-low index, which
    guarantees a DAG. With ensure_cycle a random directed cycle is
    stitched in on top of random orientations.
    """
    ids = [f"n{i:03d}" for i in range(n)]
    pairs: set[tuple[str, str]] = set()
    max_edges = int(density * n * (n - 1) / 2)
    for _ in range(max_edges):
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        if ensure_cycle:
            pairs.add((ids[i], ids[j]))
        else:
            a, b = (i, j) if i > j else (j, i)
            pairs.add((ids[a], ids[b]))
    if ensure_cycle:
        size = rng.randint(2, max(2, min(6, n)))
        members = rng.sample(ids, size)
        for a, b in zip(members, members[1:] + members[:1]):
            pairs.add((a, b))
    return make_graph(ids, sorted(pairs))


@pytest.fixture()
def mini_corpus_config(tmp_path) -> RunConfig:
    """A throwaway copy of the bundled corpus wired to this interpreter."""
    corpus = tmp_path / "corpus"
    shutil.copytree(MINI_CORPUS, corpus)
    payload = json.loads((corpus / "config.json").read_text())
    payload["language_servers"]["toy"]["launch_command"][0] = sys.executable
    (corpus / "config.json").write_text(json.dumps(payload))
    return load_config(corpus / "config.json")


def build_config(tmp_path: Path, **overrides) -> RunConfig:
    payload = {
        "project_root": str(tmp_path),
        "language": "toy",
        "file_glob": "*.toy",
        "out_dir": str(tmp_path / "out"),
    }
    payload.update(overrides)
    return config_from_dict(payload, base_dir=tmp_path)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length) or b"{}")
        status, payload = self.server.respond(body)  # type: ignore[attr-defined]
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class StubHttpServer:
    """Tiny JSON POST server; ``responder(body) -> (status, payload)``."""

    def __init__(self, responder):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._server.respond = responder  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self.url = f"http://127.0.0.1:{self._server.server_address[1]}/"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture()
def stub_http():
    servers: list[StubHttpServer] = []

    def start(responder) -> StubHttpServer:
        server = StubHttpServer(responder)
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.close()
