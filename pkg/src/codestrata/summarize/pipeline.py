"""Bottom-up summary generation over a level plan.

Levels run strictly in order; within a level every node is submitted to
a bounded worker pool. The cache is only merged at the level barrier,
so workers of one level read exactly the summaries of lower levels and
the persisted output is identical for any worker count under a
deterministic backend. Callees cut off by cycle breaking show up in the
parent's prompt as an explicit placeholder line instead of a summary.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import MutableMapping

from ..backends import BackendUnavailable
from ..graph import CodeGraph, CodeNode
from ..index import _atomic_write
from ..levels import LevelPlan
from .backends import TextBackend
from .schema import (
    CYCLE_PLACEHOLDER,
    DEFAULT_TEMPLATE,
    NO_CHILD_CONTEXT,
    ModuleSummary,
    PromptTemplate,
    StructuredSummary,
    SummaryParseError,
    parse_backend_output,
    parse_module_output,
)

logger = logging.getLogger(__name__)

# kinds that belong to a file's function roster; file/module nodes are
# aggregated separately
MODULE_MEMBER_KINDS = frozenset({"function", "method", "class"})

REPAIR_SUFFIX = (
    "\n\nThe previous reply could not be parsed."
    " Reply again with only the fenced JSON object described above."
)

_WORD = re.compile(r"\w+")


class CacheMiss(Exception):
    """A callee summary was required but neither cached nor waived."""


def _first_sentence(text: str) -> str:
    flat = " ".join(text.split())
    cut = flat.find(". ")
    return flat if cut < 0 else flat[: cut + 1]


def render_prompt(
    template: PromptTemplate,
    node: CodeNode,
    child_summaries: list[StructuredSummary],
    unavailable: list[tuple[str, str]] = (),
) -> str:
    """Render the summarization prompt for one node.

    Child context lines are "- <name>: <purpose> | <first sentence of
    details>", ordered by child node id; ``unavailable`` entries
    (child_id, child_name) render the cycle placeholder instead. With
    no children at all, the context is a fixed sentinel line.
    """
    entries = [
        (s.node_id, f"- {s.name}: {s.purpose} | {_first_sentence(s.details)}")
        for s in child_summaries
    ]
    entries += [(cid, f"- {name}: {CYCLE_PLACEHOLDER}") for cid, name in unavailable]
    entries.sort(key=lambda pair: pair[0])
    child_context = "\n".join(line for _, line in entries) if entries else NO_CHILD_CONTEXT
    return template.render(
        function_name=f"{node.name} in {node.file_path}",
        function_code=node.code,
        child_context=child_context,
    )


def _degraded(node: CodeNode, raw: str) -> StructuredSummary:
    lines = raw.splitlines()
    first = lines[0].strip() if lines else ""
    return StructuredSummary(
        node_id=node.id,
        name=node.name,
        kind=node.kind,
        purpose=first or "(empty backend output)",
        details=raw,
        outputs="",
        side_effects="none",
        raw_backend_output=raw,
    )


def _dependency_warnings(node: CodeNode, summary: StructuredSummary, callee_names: set[str]) -> list[str]:
    mentioned = set(_WORD.findall(node.code))
    warnings = []
    for dep in summary.dependencies:
        name = dep.get("name", "")
        if not name:
            warnings.append(f"{node.id}: dependency entry without a name")
        elif name not in callee_names and name not in mentioned:
            warnings.append(f"{node.id}: dependency {name!r} is neither a callee nor mentioned in the code")
    return warnings


def summarize_node(
    node_id: str,
    cache: MutableMapping[str, StructuredSummary],
    graph: CodeGraph,
    backend: TextBackend,
    *,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    broken: frozenset[tuple[str, str]] = frozenset(),
    prompt_log: MutableMapping[str, str] | None = None,
) -> StructuredSummary:
    """Generate the structured summary for one node.

    Every in-graph callee must already be cached unless its edge was
    waived by cycle breaking. The backend is invoked once; if its output
    does not parse, one repair invocation is attempted, after which a
    degraded summary (purpose from the first output line, details from
    the full output) is synthesized rather than failing.
    """
    node = graph.nodes[node_id]
    child_summaries: list[StructuredSummary] = []
    unavailable: list[tuple[str, str]] = []
    for callee in graph.adjacency.get(node_id, ()):
        if (node_id, callee) in broken:
            unavailable.append((callee, graph.nodes[callee].name))
        elif callee in cache:
            child_summaries.append(cache[callee])
        else:
            raise CacheMiss(f"callee {callee!r} of {node_id!r} is neither summarized nor waived")

    prompt = render_prompt(template, node, child_summaries, unavailable)
    if prompt_log is not None:
        prompt_log[node_id] = prompt

    raw = backend.generate(prompt)
    try:
        fields = parse_backend_output(raw)
    except SummaryParseError:
        raw = backend.generate(prompt + REPAIR_SUFFIX)
        try:
            fields = parse_backend_output(raw)
        except SummaryParseError:
            logger.warning("degraded summary for %s: output unparseable after repair", node_id)
            return _degraded(node, raw)

    summary = StructuredSummary(
        node_id=node.id,
        name=node.name,
        kind=node.kind,
        raw_backend_output=raw,
        **fields,
    )
    callee_names = {graph.nodes[c].name for c in graph.adjacency.get(node_id, ())}
    for warning in _dependency_warnings(node, summary, callee_names):
        logger.warning("%s", warning)
    return summary


class _SingleFlight:
    """Serializes generate() for backends that declare single_flight."""

    def __init__(self, backend: TextBackend):
        self._backend = backend
        self._lock = threading.Lock()

    def generate(self, prompt: str) -> str:
        with self._lock:
            return self._backend.generate(prompt)


class SummaryStore:
    """JSON-lines summary persistence, one object per node, sorted by id.

    ``write_snapshot`` rewrites the whole file atomically, which keeps
    it globally sorted while still durable at every level barrier.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def write_snapshot(self, cache: MutableMapping[str, StructuredSummary]) -> None:
        lines = [
            json.dumps(cache[nid].to_json_dict(), ensure_ascii=False, sort_keys=True)
            for nid in sorted(cache)
        ]
        _atomic_write(self.path, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))

    def load(self) -> dict[str, StructuredSummary]:
        out: dict[str, StructuredSummary] = {}
        with open(self.path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    summary = StructuredSummary.from_json_dict(json.loads(line))
                    out[summary.node_id] = summary
        return out


def process_levels(
    plan: LevelPlan,
    graph: CodeGraph,
    backend: TextBackend,
    workers: int,
    *,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    store: SummaryStore | None = None,
    prompt_log: MutableMapping[str, str] | None = None,
) -> tuple[dict[str, StructuredSummary], dict[str, list[str]]]:
    """Summarize every node, level by level.

    Returns the completed cache and a map of file path to the node ids
    of that file's summarized functions/methods/classes. Per-node
    degradations never abort; a BackendUnavailable aborts after the
    current level has drained, leaving the store at the previous level
    barrier.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    broken = frozenset(plan.broken_edges)
    generator = _SingleFlight(backend) if getattr(backend, "single_flight", False) else backend

    cache: dict[str, StructuredSummary] = {}
    modules: dict[str, list[str]] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for level in plan.levels:
            futures = {
                nid: pool.submit(
                    summarize_node,
                    nid,
                    cache,
                    graph,
                    generator,
                    template=template,
                    broken=broken,
                    prompt_log=prompt_log,
                )
                for nid in level
            }
            results: dict[str, StructuredSummary] = {}
            transport_errors: list[tuple[str, BackendUnavailable]] = []
            other_errors: list[tuple[str, Exception]] = []
            for nid, future in futures.items():
                try:
                    results[nid] = future.result()
                except BackendUnavailable as exc:
                    transport_errors.append((nid, exc))
                except Exception as exc:  # noqa: BLE001 - re-raised below
                    other_errors.append((nid, exc))
            if other_errors:
                other_errors.sort(key=lambda pair: pair[0])
                raise other_errors[0][1]
            if transport_errors:
                transport_errors.sort(key=lambda pair: pair[0])
                raise transport_errors[0][1]

            for nid in sorted(results):
                if nid in cache:
                    raise RuntimeError(f"summary for {nid!r} written twice in one run")
                cache[nid] = results[nid]
                node = graph.nodes[nid]
                if node.kind in MODULE_MEMBER_KINDS:
                    modules.setdefault(node.file_path, []).append(nid)
            if store is not None:
                store.write_snapshot(cache)

    return cache, modules


def _module_prompt(file_path: str, pairs: list[dict[str, str]]) -> str:
    lines = [f"- {p['name']}: {p['summary']}" for p in pairs]
    listing = "\n".join(lines) if lines else "(no functions)"
    return (
        f"Module: {file_path}\n\nFunctions:\n{listing}\n\n"
        "Write one overview paragraph describing what this module provides,"
        " based only on the functions listed."
        ' Reply with a fenced JSON object: {"overview": "..."}'
    )


def summarize_modules(
    modules: dict[str, list[str]],
    cache: MutableMapping[str, StructuredSummary],
    backend: TextBackend,
    graph: CodeGraph | None = None,
) -> list[ModuleSummary]:
    """Aggregate per-file function summaries into module summaries.

    For every file, (name, details) pairs are assembled in node-id order
    and handed to the backend; module ids resolve to the file node of
    that path when the graph carries one, else to the path itself.
    """
    file_node_ids: dict[str, str] = {}
    if graph is not None:
        for node in graph.nodes.values():
            if node.kind in ("file", "module"):
                file_node_ids.setdefault(node.file_path, node.id)

    out: list[ModuleSummary] = []
    for file_path in sorted(modules):
        node_ids = sorted(modules[file_path])
        pairs = [{"name": cache[nid].name, "summary": cache[nid].details} for nid in node_ids]
        raw = backend.generate(_module_prompt(file_path, pairs))
        try:
            overview = parse_module_output(raw)
        except SummaryParseError:
            logger.warning("degraded module summary for %s", file_path)
            overview = raw.splitlines()[0].strip() if raw.splitlines() else "(empty backend output)"
        out.append(
            ModuleSummary(
                module_id=file_node_ids.get(file_path, file_path),
                overview=overview,
                function_index=[
                    {"name": cache[nid].name, "purpose": cache[nid].purpose} for nid in node_ids
                ],
            )
        )
    return out
