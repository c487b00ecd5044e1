"""Request and response schemas for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    name: str
    version: str


class ArtifactInfo(BaseModel):
    name: str
    path: str
    exists: bool
    size: int | None = None
    producing_command: str


class IndexRequest(BaseModel):
    from_graph: str | None = None


class IndexResponse(BaseModel):
    nodes: int
    edges: int
    files: int
    warnings: list[str]
    graph_path: str


class SummarizeRequest(BaseModel):
    workers: int | None = Field(default=None, ge=1)
    backend: Literal["llm", "extractive", "replay"] | None = None


class SummarizeResponse(BaseModel):
    summaries: int
    modules: int
    levels: int
    broken_edges: list[tuple[str, str]]
    summaries_path: str
    modules_path: str


class EmbedRequest(BaseModel):
    embed_backend: Literal["http", "hash"] | None = None
    export: str | None = None


class EmbedResponse(BaseModel):
    code_records: int
    summary_records: int
    dimension: int
    code_index_path: str
    summary_index_path: str
    export_path: str | None = None


class QueryBody(BaseModel):
    text: str
    collection: Literal["code", "summary"] = "summary"
    k: int = Field(default=5, ge=1)
    expand_context: bool = False
    depth: int = Field(default=1, ge=0, le=3)


class QueryHit(BaseModel):
    node_id: str
    score: float
    rank: int
    file_path: str | None = None
    name: str | None = None


class QueryEdge(BaseModel):
    from_: str = Field(alias="from")
    to: str
    kind: str

    model_config = {"populate_by_name": True}


class QueryContext(BaseModel):
    nodes: list[str]
    edges: list[QueryEdge]
    importance: dict[str, float]


class QueryResponse(BaseModel):
    hits: list[QueryHit]
    context: QueryContext | None = None


class BenchRequest(BaseModel):
    per_function: int | None = Field(default=None, ge=1)
    ks: list[int] | None = None
    workers: int | None = Field(default=None, ge=1)
    backend: Literal["llm", "extractive", "replay"] | None = None
    embed_backend: Literal["http", "hash"] | None = None


class BenchResponse(BaseModel):
    report: dict
    invariants_ok: bool
    violations: list[str]
    queries: int
    report_json_path: str
    report_txt_path: str
    queries_path: str
