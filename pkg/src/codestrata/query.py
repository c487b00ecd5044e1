"""Retrieval path: embed a query, search a collection, expand context.

The optional context stage grows the hit set into an induced subgraph
over an undirected view of all edge kinds and scores each node by a
blend of its retrieval score and its degree inside the subgraph. The
0.7 retrieval / 0.3 degree weighting is this package's definition:
simple, monotone in both signals, and checkable in closed form.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbedBackend, embed
from .graph import CodeEdge, CodeGraph
from .index import Collection, SearchHit

RETRIEVAL_WEIGHT = 0.7
DEGREE_WEIGHT = 0.3
MAX_EXPANSION_DEPTH = 3


@dataclass(frozen=True)
class QueryRequest:
    text: str
    collection: str = "summary"
    k: int = 5
    expand_context: bool = False
    expansion_depth: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.expansion_depth <= MAX_EXPANSION_DEPTH:
            raise ValueError(f"expansion_depth must be in [0, {MAX_EXPANSION_DEPTH}]")
        if self.collection not in ("code", "summary"):
            raise ValueError(f"unknown collection {self.collection!r}")


@dataclass
class ContextSubgraph:
    nodes: set[str]
    edges: list[CodeEdge]
    importance: dict[str, float] = field(default_factory=dict)


def rehydrate(hits: list[SearchHit], graph: CodeGraph, depth: int) -> ContextSubgraph:
    """BFS from the hit nodes over an undirected view of every edge kind,
    up to ``depth`` steps, returning the induced subgraph."""
    if not hits:
        raise ValueError("rehydrate requires at least one hit")
    neighbors: dict[str, set[str]] = {nid: set() for nid in graph.nodes}
    for edge in graph.edges:
        if edge.from_id != edge.to_id:
            neighbors[edge.from_id].add(edge.to_id)
            neighbors[edge.to_id].add(edge.from_id)

    visited = {hit.node_id for hit in hits if hit.node_id in graph.nodes}
    frontier = deque((nid, 0) for nid in sorted(visited))
    while frontier:
        nid, dist = frontier.popleft()
        if dist >= depth:
            continue
        for other in sorted(neighbors.get(nid, ())):
            if other not in visited:
                visited.add(other)
                frontier.append((other, dist + 1))

    induced = [e for e in graph.edges if e.from_id in visited and e.to_id in visited]
    return ContextSubgraph(nodes=visited, edges=induced)


def score_importance(subgraph: ContextSubgraph, hits: list[SearchHit]) -> dict[str, float]:
    """Blend retrieval score and subgraph degree into [0, 1] importance.

    Retrieval scores are min-max normalized over the hits (all-equal
    hits normalize to 1, non-hits to 0), degree is the count of distinct
    neighbors inside the subgraph scaled by the maximum degree, and the
    final map is scaled so its maximum is exactly 1.
    """
    scores = {hit.node_id: hit.score for hit in hits if hit.node_id in subgraph.nodes}
    lo, hi = (min(scores.values()), max(scores.values())) if scores else (0.0, 0.0)

    def retrieval(nid: str) -> float:
        if nid not in scores:
            return 0.0
        if hi == lo:
            return 1.0
        return (scores[nid] - lo) / (hi - lo)

    neighbor_sets: dict[str, set[str]] = {nid: set() for nid in subgraph.nodes}
    for edge in subgraph.edges:
        if edge.from_id != edge.to_id:
            neighbor_sets[edge.from_id].add(edge.to_id)
            neighbor_sets[edge.to_id].add(edge.from_id)
    degrees = {nid: len(peers) for nid, peers in neighbor_sets.items()}
    max_degree = max(degrees.values(), default=0)

    raw = {
        nid: RETRIEVAL_WEIGHT * retrieval(nid)
        + (DEGREE_WEIGHT * degrees[nid] / max_degree if max_degree else 0.0)
        for nid in subgraph.nodes
    }
    top = max(raw.values(), default=0.0)
    if top <= 0.0:
        return {nid: 0.0 for nid in raw}
    return {nid: value / top for nid, value in raw.items()}


def answer(
    request: QueryRequest,
    graph: CodeGraph | None,
    collections: dict[str, Collection],
    embed_backend: EmbedBackend,
) -> tuple[list[SearchHit], ContextSubgraph | None]:
    """Embed the query, search the requested collection, and optionally
    expand the hits into a scored context subgraph."""
    if request.collection not in collections:
        raise KeyError(f"collection {request.collection!r} is not loaded")
    collection = collections[request.collection]
    query_vector = embed(request.text, embed_backend)
    hits = collection.search(np.asarray(query_vector), request.k)

    context: ContextSubgraph | None = None
    if request.expand_context:
        if graph is None:
            raise ValueError("context expansion requires the code graph")
        context = rehydrate(hits, graph, request.expansion_depth)
        context.importance = score_importance(context, hits)
    return hits, context


def to_output_dict(
    hits: list[SearchHit],
    context: ContextSubgraph | None,
    collection: Collection,
) -> dict:
    """The JSON shape emitted by the query surfaces."""
    payload: dict = {
        "hits": [
            {
                "node_id": h.node_id,
                "score": h.score,
                "rank": h.rank,
                "file_path": collection.metadata.get(h.node_id, {}).get("file_path"),
                "name": collection.metadata.get(h.node_id, {}).get("name"),
            }
            for h in hits
        ]
    }
    if context is not None:
        payload["context"] = {
            "nodes": sorted(context.nodes),
            "edges": [
                {"from": e.from_id, "to": e.to_id, "kind": e.kind} for e in context.edges
            ],
            "importance": {nid: context.importance[nid] for nid in sorted(context.importance)},
        }
    return payload


def format_table(output: dict) -> str:
    """Aligned human-readable rendering of a query result."""
    rows = [("rank", "score", "node_id", "file", "name")]
    for hit in output["hits"]:
        rows.append(
            (
                str(hit["rank"]),
                f"{hit['score']:.4f}",
                hit["node_id"],
                hit.get("file_path") or "-",
                hit.get("name") or "-",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    if output.get("context"):
        lines.append("")
        lines.append(f"context nodes: {len(output['context']['nodes'])}")
        lines.append(f"context edges: {len(output['context']['edges'])}")
        top = sorted(output["context"]["importance"].items(), key=lambda kv: (-kv[1], kv[0]))
        for nid, score in top[:10]:
            lines.append(f"  {score:.3f}  {nid}")
    return "\n".join(lines)
