"""Code graph data model and its canonical JSON interchange format.

The graph is the substrate for every later stage: nodes are code elements
(functions, methods, classes, files), edges are typed relationships
(call, import, inheritance). Graphs serialize to a canonical JSON form
whose bytes are stable across runs, which keeps downstream artifacts
diffable and makes idempotence testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

NODE_KINDS = frozenset({"function", "method", "class", "module", "file"})
EDGE_KINDS = frozenset({"call", "import", "inheritance"})

# kinds that must carry source text
_CODE_REQUIRED = frozenset({"function", "method"})


class GraphError(Exception):
    """Base class for graph construction and serialization errors."""


class DuplicateNode(GraphError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"duplicate node id {node_id!r}")


class DanglingEdge(GraphError):
    def __init__(self, from_id: str, to_id: str):
        self.from_id = from_id
        self.to_id = to_id
        super().__init__(f"edge references missing node: {from_id!r} -> {to_id!r}")


class ParseError(GraphError):
    """Malformed graph JSON; ``location`` narrows down the offending element."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class CodeNode:
    """One code element.

    ``span`` is (start_line, end_line), 1-based and inclusive. ``code`` is
    the verbatim source text of the element; module/file nodes may leave
    it empty, function and method nodes may not.
    """

    id: str
    kind: str
    name: str
    qualified_name: str
    file_path: str
    span: tuple[int, int]
    language: str
    code: str

    def validate(self) -> None:
        if not self.id:
            raise GraphError("node id must be non-empty")
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.id!r}: unknown kind {self.kind!r}")
        start, end = self.span
        if start < 1 or end < start:
            raise GraphError(f"node {self.id!r}: invalid span {self.span!r}")
        if self.kind in _CODE_REQUIRED and not self.code:
            raise GraphError(f"node {self.id!r}: {self.kind} nodes require source text")


@dataclass(frozen=True, order=True)
class CodeEdge:
    from_id: str
    to_id: str
    kind: str

    def validate(self) -> None:
        if self.kind not in EDGE_KINDS:
            raise GraphError(f"edge {self.from_id!r} -> {self.to_id!r}: unknown kind {self.kind!r}")


@dataclass
class CodeGraph:
    """Validated graph with a derived call adjacency.

    ``adjacency`` maps every node id to its sorted list of distinct call
    targets. Self-calls stay in ``edges`` but are excluded here: a
    recursive function is trivially its own dependency and must not gate
    the leveling stage.
    """

    nodes: dict[str, CodeNode]
    edges: list[CodeEdge]
    adjacency: dict[str, list[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)


def build_graph(nodes: list[CodeNode], edges: list[CodeEdge]) -> CodeGraph:
    """Validate nodes and edges and derive the call adjacency.

    Duplicate (from, to, kind) edges collapse to one. Raises
    DuplicateNode / DanglingEdge / GraphError on invariant violations.
    """
    by_id: dict[str, CodeNode] = {}
    for node in nodes:
        node.validate()
        if node.id in by_id:
            raise DuplicateNode(node.id)
        by_id[node.id] = node

    unique: set[CodeEdge] = set()
    for edge in edges:
        edge.validate()
        if edge.from_id not in by_id or edge.to_id not in by_id:
            raise DanglingEdge(edge.from_id, edge.to_id)
        unique.add(edge)
    canonical_edges = sorted(unique)

    adjacency: dict[str, set[str]] = {nid: set() for nid in by_id}
    for edge in canonical_edges:
        if edge.kind == "call" and edge.from_id != edge.to_id:
            adjacency[edge.from_id].add(edge.to_id)

    return CodeGraph(
        nodes=by_id,
        edges=canonical_edges,
        adjacency={nid: sorted(callees) for nid, callees in adjacency.items()},
    )


def _node_payload(node: CodeNode) -> dict:
    return {
        "id": node.id,
        "kind": node.kind,
        "name": node.name,
        "qualified_name": node.qualified_name,
        "file_path": node.file_path,
        "span": list(node.span),
        "language": node.language,
        "code": node.code,
    }


def graph_to_json(graph: CodeGraph) -> bytes:
    """Serialize to canonical UTF-8 JSON: nodes sorted by id, edges by
    (from, to, kind). The same graph always produces the same bytes."""
    payload = {
        "nodes": [_node_payload(graph.nodes[nid]) for nid in sorted(graph.nodes)],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "kind": e.kind}
            for e in sorted(graph.edges)
        ],
    }
    return (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def _require(obj: dict, key: str, types, location: str):
    if key not in obj:
        raise ParseError(f"missing {key!r}", location)
    value = obj[key]
    if not isinstance(value, types):
        raise ParseError(f"field {key!r} has wrong type", location)
    return value


def json_to_graph(data: bytes | str) -> CodeGraph:
    """Parse graph JSON, raising ParseError with a location on bad input."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from exc
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc

    if not isinstance(payload, dict):
        raise ParseError("top-level value must be an object")
    raw_nodes = _require(payload, "nodes", list, "$")
    raw_edges = _require(payload, "edges", list, "$")

    nodes: list[CodeNode] = []
    for i, item in enumerate(raw_nodes):
        loc = f"nodes[{i}]"
        if not isinstance(item, dict):
            raise ParseError("node must be an object", loc)
        node_id = _require(item, "id", str, loc)
        span = _require(item, "span", list, loc)
        if len(span) != 2 or not all(isinstance(v, int) for v in span):
            raise ParseError("span must be [start_line, end_line]", loc)
        nodes.append(
            CodeNode(
                id=node_id,
                kind=_require(item, "kind", str, loc),
                name=_require(item, "name", str, loc),
                qualified_name=_require(item, "qualified_name", str, loc),
                file_path=_require(item, "file_path", str, loc),
                span=(span[0], span[1]),
                language=_require(item, "language", str, loc),
                code=_require(item, "code", str, loc),
            )
        )

    edges: list[CodeEdge] = []
    for i, item in enumerate(raw_edges):
        loc = f"edges[{i}]"
        if not isinstance(item, dict):
            raise ParseError("edge must be an object", loc)
        edges.append(
            CodeEdge(
                from_id=_require(item, "from", str, loc),
                to_id=_require(item, "to", str, loc),
                kind=_require(item, "kind", str, loc),
            )
        )

    return build_graph(nodes, edges)
