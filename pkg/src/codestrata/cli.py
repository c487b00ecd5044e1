"""Thin command-line client for the codestrata service.

Every subcommand issues HTTP requests against the FastAPI app: a remote
server when --server is given, otherwise an in-process instance of the
same app over an ASGI transport, so local runs go through the identical
request path without needing a daemon.
"""

from __future__ import annotations

import asyncio
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import httpx

from .config import load_config
from .query import format_table
from .service.app import create_app

_EXIT_INVARIANTS = 2


@dataclass
class CliContext:
    config_path: Path
    server: str | None


async def _request(ctx: CliContext, method: str, path: str, body: dict | None = None) -> httpx.Response:
    if ctx.server:
        async with httpx.AsyncClient(base_url=ctx.server, timeout=600.0) as client:
            return await client.request(method, path, json=body)
    app = create_app(load_config(ctx.config_path))
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://codestrata.local", timeout=600.0) as client:
        return await client.request(method, path, json=body)


def _call(ctx: CliContext, method: str, path: str, body: dict | None = None) -> dict:
    try:
        response = asyncio.run(_request(ctx, method, path, body))
    except httpx.HTTPError as exc:
        raise click.ClickException(f"cannot reach service: {exc}") from exc
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{detail}")
    return response.json()


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=Path("codestrata.json"),
    show_default=True,
    help="Run configuration JSON.",
)
@click.option("--server", default=None, help="Remote service URL; default runs in-process.")
@click.option("--verbose", "-v", is_flag=True, help="Log at INFO level.")
@click.pass_context
def main(ctx: click.Context, config_path: Path, server: str | None, verbose: bool) -> None:
    """Code graph extraction, level-order summaries, and retrieval."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = CliContext(config_path=config_path, server=server)


@main.command()
@click.option("--from-graph", "from_graph", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Import this graph JSON instead of running the language server.")
@click.pass_obj
def index(ctx: CliContext, from_graph: str | None) -> None:
    """Build the code graph artifact (graph.json)."""
    out = _call(ctx, "POST", "/index", {"from_graph": from_graph})
    click.echo(
        f"graph: {out['nodes']} nodes, {out['edges']} edges, {out['files']} files -> {out['graph_path']}"
    )
    for warning in out["warnings"]:
        click.echo(f"warning: {warning}", err=True)


@main.command()
@click.option("--workers", type=int, default=None, help="Worker pool size per level.")
@click.option("--backend", type=click.Choice(["llm", "extractive", "replay"]), default=None)
@click.pass_obj
def summarize(ctx: CliContext, workers: int | None, backend: str | None) -> None:
    """Generate bottom-up summaries (summaries.jsonl, modules.jsonl)."""
    out = _call(ctx, "POST", "/summarize", {"workers": workers, "backend": backend})
    click.echo(
        f"summaries: {out['summaries']} nodes over {out['levels']} levels"
        f" ({len(out['broken_edges'])} broken edges) -> {out['summaries_path']}"
    )
    click.echo(f"modules: {out['modules']} -> {out['modules_path']}")


@main.command()
@click.option("--embed-backend", type=click.Choice(["http", "hash"]), default=None)
@click.option("--export", type=click.Path(dir_okay=False), default=None,
              help="Also write a JSON export of both collections to this path.")
@click.pass_obj
def embed(ctx: CliContext, embed_backend: str | None, export: str | None) -> None:
    """Embed raw code and flattened summaries into the two indexes."""
    out = _call(ctx, "POST", "/embed", {"embed_backend": embed_backend, "export": export})
    click.echo(
        f"embedded {out['code_records']} code / {out['summary_records']} summary records"
        f" at dimension {out['dimension']}"
    )
    click.echo(f"indexes: {out['code_index_path']}, {out['summary_index_path']}")
    if out.get("export_path"):
        click.echo(f"export: {out['export_path']}")


@main.command()
@click.argument("text")
@click.option("--collection", type=click.Choice(["code", "summary"]), default="summary", show_default=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--expand-context", is_flag=True, help="Expand hits into a scored context subgraph.")
@click.option("--depth", type=click.IntRange(0, 3), default=1, show_default=True)
@click.option("--table", is_flag=True, help="Human-readable table instead of JSON.")
@click.pass_obj
def query(ctx: CliContext, text: str, collection: str, k: int, expand_context: bool, depth: int, table: bool) -> None:
    """Retrieve the top-k nodes for a query."""
    out = _call(
        ctx,
        "POST",
        "/query",
        {"text": text, "collection": collection, "k": k, "expand_context": expand_context, "depth": depth},
    )
    if table:
        click.echo(format_table(out))
    else:
        click.echo(json.dumps(out, ensure_ascii=False, indent=2))


@main.command()
@click.option("--per-function", type=int, default=None, help="Queries to synthesize per function.")
@click.option("--workers", type=int, default=None)
@click.option("--backend", type=click.Choice(["llm", "extractive", "replay"]), default=None)
@click.option("--embed-backend", type=click.Choice(["http", "hash"]), default=None)
@click.pass_obj
def bench(ctx: CliContext, per_function: int | None, workers: int | None, backend: str | None,
          embed_backend: str | None) -> None:
    """Generate queries and evaluate both collections (report.json/.txt)."""
    out = _call(
        ctx,
        "POST",
        "/bench",
        {
            "per_function": per_function,
            "workers": workers,
            "backend": backend,
            "embed_backend": embed_backend,
        },
    )
    click.echo(f"evaluated {out['queries']} queries -> {out['report_json_path']}")
    report = out["report"]
    for label in ("code", "summary"):
        pass_at = report["collections"][label]["pass_at"]
        cells = "  ".join(f"P@{k}={pass_at[k]:.2f}" for k in sorted(pass_at, key=int))
        click.echo(f"{label:8s} {cells}")
    if not out["invariants_ok"]:
        for violation in out["violations"]:
            click.echo(f"invariant violated: {violation}", err=True)
        sys.exit(_EXIT_INVARIANTS)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8600, show_default=True)
@click.pass_obj
def serve(ctx: CliContext, host: str, port: int) -> None:
    """Run the HTTP service for this workspace."""
    import uvicorn

    app = create_app(load_config(ctx.config_path))
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.pass_obj
def artifacts(ctx: CliContext) -> None:
    """Show which pipeline artifacts exist."""
    out = _call(ctx, "GET", "/artifacts")
    for item in out:
        mark = "present" if item["exists"] else f"missing (run `{item['producing_command']}`)"
        click.echo(f"{item['name']:>14s}  {mark:<28s} {item['path']}")


if __name__ == "__main__":
    main()
