"""FastAPI service wrapping one workspace.

Pipeline commands mutate workspace artifacts and therefore serialize
under a lock; queries are read-only and run concurrently. The CLI is a
thin client of these endpoints.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__
from ..backends import BackendUnavailable
from ..bench import BenchmarkError
from ..config import ConfigError, RunConfig
from ..graph import GraphError
from ..index import EmptyCollection, VectorIndexError
from ..lsp.errors import LspError
from ..query import QueryRequest
from ..workspace import MissingArtifact, Workspace
from .models import (
    ArtifactInfo,
    BenchRequest,
    BenchResponse,
    EmbedRequest,
    EmbedResponse,
    HealthResponse,
    IndexRequest,
    IndexResponse,
    QueryBody,
    QueryResponse,
    SummarizeRequest,
    SummarizeResponse,
)


def create_app(config: RunConfig) -> FastAPI:
    workspace = Workspace(config)
    app = FastAPI(title="codestrata", version=__version__)
    app.state.workspace = workspace
    command_lock = threading.Lock()

    @app.exception_handler(MissingArtifact)
    async def _missing(_, exc: MissingArtifact):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(BackendUnavailable)
    async def _backend(_, exc: BackendUnavailable):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.exception_handler(ConfigError)
    async def _config(_, exc: ConfigError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    for error_type in (GraphError, LspError, VectorIndexError, BenchmarkError, ValueError):

        @app.exception_handler(error_type)
        async def _bad_input(_, exc):
            return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", name="codestrata", version=__version__)

    @app.get("/artifacts", response_model=list[ArtifactInfo])
    def artifacts() -> list[ArtifactInfo]:
        return [
            ArtifactInfo(
                name=s.name,
                path=str(s.path),
                exists=s.exists,
                size=s.size,
                producing_command=s.producing_command,
            )
            for s in workspace.artifact_status()
        ]

    @app.post("/index", response_model=IndexResponse)
    def index(body: IndexRequest) -> IndexResponse:
        with command_lock:
            out = workspace.run_index(from_graph=body.from_graph)
        return IndexResponse(
            nodes=out.nodes,
            edges=out.edges,
            files=out.files,
            warnings=out.warnings,
            graph_path=str(out.graph_path),
        )

    @app.post("/summarize", response_model=SummarizeResponse)
    def summarize(body: SummarizeRequest) -> SummarizeResponse:
        with command_lock:
            out = workspace.run_summarize(workers=body.workers, backend=body.backend)
        return SummarizeResponse(
            summaries=out.summaries,
            modules=out.modules,
            levels=out.levels,
            broken_edges=out.broken_edges,
            summaries_path=str(out.summaries_path),
            modules_path=str(out.modules_path),
        )

    @app.post("/embed", response_model=EmbedResponse)
    def embed(body: EmbedRequest) -> EmbedResponse:
        with command_lock:
            out = workspace.run_embed(embed_backend=body.embed_backend, export=body.export)
        return EmbedResponse(
            code_records=out.code_records,
            summary_records=out.summary_records,
            dimension=out.dimension,
            code_index_path=str(out.code_index_path),
            summary_index_path=str(out.summary_index_path),
            export_path=str(out.export_path) if out.export_path else None,
        )

    @app.post("/query", response_model=QueryResponse)
    def query(body: QueryBody) -> QueryResponse:
        try:
            request = QueryRequest(
                text=body.text,
                collection=body.collection,
                k=body.k,
                expand_context=body.expand_context,
                expansion_depth=body.depth,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            payload = workspace.run_query(request)
        except EmptyCollection as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return QueryResponse.model_validate(payload)

    @app.post("/bench", response_model=BenchResponse)
    def bench(body: BenchRequest) -> BenchResponse:
        with command_lock:
            out = workspace.run_bench(
                per_function=body.per_function,
                ks=tuple(body.ks) if body.ks else None,
                workers=body.workers,
                backend=body.backend,
                embed_backend=body.embed_backend,
            )
        return BenchResponse(
            report=out.report.to_json_dict(),
            invariants_ok=not out.violations,
            violations=out.violations,
            queries=out.queries,
            report_json_path=str(out.report_json_path),
            report_txt_path=str(out.report_txt_path),
            queries_path=str(out.queries_path),
        )

    return app
