"""Symbols, call edges, and whole graphs out of a language server.

Call edges prefer the call-hierarchy route when the server advertises
it and fall back to reference resolution otherwise, since capability
coverage varies widely across real servers. Per-file and per-symbol
failures are tolerated and reported; extraction only fails outright
when nothing could be analyzed.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..graph import CodeEdge, CodeGraph, CodeNode, build_graph
from .client import LspServerConfig, Session, start_session, uri_to_path
from .errors import LspError, RequestTimeout, ServerError

logger = logging.getLogger(__name__)

# LSP SymbolKind values worth turning into graph nodes
_KIND_MAP = {5: "class", 6: "method", 9: "method", 12: "function"}
_CALLER_KINDS = frozenset({6, 9, 12})

_IMPORT_LINE = re.compile(
    r"^\s*(?:use|import|include|require|from)\s+[\"'<]?([A-Za-z0-9_./-]+)", re.MULTILINE
)


class NoFiles(LspError):
    pass


class ExtractionFailed(LspError):
    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures
        super().__init__(f"no file could be analyzed ({len(failures)} failures)")


@dataclass(frozen=True)
class SymbolRecord:
    """One symbol as reported by the server.

    Spans are 1-based inclusive line ranges; ``selection_pos`` keeps the
    raw 0-based LSP position of the name token for follow-up requests.
    """

    name: str
    qualified_name: str
    kind: int
    file_path: str
    span: tuple[int, int]
    selection_span: tuple[int, int]
    selection_pos: tuple[int, int]


@dataclass
class ExtractionResult:
    graph: CodeGraph
    warnings: list[str] = field(default_factory=list)
    failed_files: list[tuple[str, str]] = field(default_factory=list)


def symbol_node_id(symbol: SymbolRecord) -> str:
    return f"{symbol.file_path}::{symbol.qualified_name}@{symbol.span[0]}"


def _range_to_span(rng: dict) -> tuple[int, int]:
    start = rng["start"]["line"] + 1
    end = rng["end"]["line"] + 1
    if rng["end"]["character"] == 0:
        end -= 1
    return (start, max(start, end))


def _flatten_document_symbols(items: list, file_path: str, prefix: str = "") -> list[SymbolRecord]:
    records: list[SymbolRecord] = []
    for item in items:
        name = item.get("name", "")
        qualified = f"{prefix}::{name}" if prefix else name
        kind = item.get("kind", 0)
        if "range" in item:  # hierarchical DocumentSymbol
            selection = item.get("selectionRange", item["range"])
            if kind in _KIND_MAP:
                records.append(
                    SymbolRecord(
                        name=name,
                        qualified_name=qualified,
                        kind=kind,
                        file_path=file_path,
                        span=_range_to_span(item["range"]),
                        selection_span=_range_to_span(selection),
                        selection_pos=(selection["start"]["line"], selection["start"]["character"]),
                    )
                )
            records.extend(_flatten_document_symbols(item.get("children", []), file_path, qualified))
        elif "location" in item:  # flat SymbolInformation
            rng = item["location"]["range"]
            container = item.get("containerName") or ""
            qualified = f"{container}::{name}" if container else name
            if kind in _KIND_MAP:
                records.append(
                    SymbolRecord(
                        name=name,
                        qualified_name=qualified,
                        kind=kind,
                        file_path=file_path,
                        span=_range_to_span(rng),
                        selection_span=_range_to_span(rng),
                        selection_pos=(rng["start"]["line"], rng["start"]["character"]),
                    )
                )
    return records


def extract_symbols(session: Session, file_path: str) -> list[SymbolRecord]:
    """Function/method/class symbols of one file, in document order,
    with nested symbol trees flattened into ::-joined qualified names."""
    result = session.request(
        "textDocument/documentSymbol", {"textDocument": {"uri": session.uri_for(file_path)}}
    )
    if not result:
        return []
    return _flatten_document_symbols(result, file_path)


def _relpath(session: Session, uri: str) -> str | None:
    try:
        return uri_to_path(uri).resolve().relative_to(session.root).as_posix()
    except ValueError:
        return None


def extract_call_edges(session: Session, symbols: list[SymbolRecord]) -> list[CodeEdge]:
    """Caller -> callee edges among the known symbols, deduplicated and
    sorted. Targets that resolve outside the symbol set are dropped;
    per-symbol failures are logged and skipped."""
    by_selection = {(s.file_path, s.selection_pos[0]): s for s in symbols}
    use_hierarchy = bool(session.capabilities.get("callHierarchyProvider"))
    edges: set[CodeEdge] = set()

    for symbol in symbols:
        if symbol.kind not in _CALLER_KINDS:
            continue
        try:
            if use_hierarchy:
                edges.update(_outgoing_via_hierarchy(session, symbol, by_selection))
            else:
                edges.update(_incoming_via_references(session, symbol, symbols))
        except (ServerError, RequestTimeout) as exc:
            logger.warning("call extraction failed for %s: %s", symbol.qualified_name, exc)
    return sorted(edges)


def _outgoing_via_hierarchy(
    session: Session,
    symbol: SymbolRecord,
    by_selection: dict[tuple[str, int], SymbolRecord],
) -> set[CodeEdge]:
    uri = session.uri_for(symbol.file_path)
    position = {"line": symbol.selection_pos[0], "character": symbol.selection_pos[1]}
    items = session.request(
        "textDocument/prepareCallHierarchy",
        {"textDocument": {"uri": uri}, "position": position},
    )
    edges: set[CodeEdge] = set()
    for item in items or []:
        calls = session.request("callHierarchy/outgoingCalls", {"item": item})
        for call in calls or []:
            target = call.get("to", {})
            rel = _relpath(session, target.get("uri", ""))
            if rel is None:
                continue
            line = target.get("selectionRange", {}).get("start", {}).get("line")
            resolved = by_selection.get((rel, line))
            if resolved is None:
                continue  # target outside the known symbol set
            edges.add(CodeEdge(symbol_node_id(symbol), symbol_node_id(resolved), "call"))
    return edges


def _incoming_via_references(
    session: Session,
    symbol: SymbolRecord,
    symbols: list[SymbolRecord],
) -> set[CodeEdge]:
    uri = session.uri_for(symbol.file_path)
    position = {"line": symbol.selection_pos[0], "character": symbol.selection_pos[1]}
    locations = session.request(
        "textDocument/references",
        {
            "textDocument": {"uri": uri},
            "position": position,
            "context": {"includeDeclaration": False},
        },
    )
    edges: set[CodeEdge] = set()
    for location in locations or []:
        rel = _relpath(session, location.get("uri", ""))
        if rel is None:
            continue
        line = location.get("range", {}).get("start", {}).get("line", -1) + 1
        caller = _innermost_container(symbols, rel, line)
        if caller is None:
            continue  # call site outside the known symbol set
        edges.add(CodeEdge(symbol_node_id(caller), symbol_node_id(symbol), "call"))
    return edges


def _innermost_container(symbols: list[SymbolRecord], file_path: str, line: int) -> SymbolRecord | None:
    best: SymbolRecord | None = None
    for symbol in symbols:
        if symbol.file_path != file_path or symbol.kind not in _CALLER_KINDS:
            continue
        start, end = symbol.span
        if start <= line <= end:
            if best is None or (end - start) < (best.span[1] - best.span[0]):
                best = symbol
    return best


def _file_import_edges(files: dict[str, str], texts: dict[str, str]) -> list[CodeEdge]:
    """Heuristic file -> file import edges from import-like lines whose
    target matches another analyzed file's stem."""
    stems = {Path(path).stem: path for path in files}
    edges = []
    for path, text in texts.items():
        for match in _IMPORT_LINE.finditer(text):
            stem = Path(match.group(1)).stem
            target = stems.get(stem)
            if target and target != path:
                edges.append(CodeEdge(files[path], files[target], "import"))
    return edges


def extract_graph(config: LspServerConfig, file_glob: str) -> ExtractionResult:
    """Full pipeline: session, symbols per file, nodes with sliced code,
    call and import edges, validated graph.

    Files are processed in sorted path order so identical server
    behavior yields byte-identical canonical graph JSON. Fails only
    when the glob matches nothing or every file fails.
    """
    root = Path(config.root_path).resolve()
    rel_files = sorted(
        p.relative_to(root).as_posix() for p in root.glob(file_glob) if p.is_file()
    )
    if not rel_files:
        raise NoFiles(f"no files match {file_glob!r} under {root}")

    nodes: list[CodeNode] = []
    symbols: list[SymbolRecord] = []
    warnings: list[str] = []
    failed: list[tuple[str, str]] = []
    file_node_ids: dict[str, str] = {}
    texts: dict[str, str] = {}

    session = start_session(config)
    try:
        for rel in rel_files:
            try:
                text = (root / rel).read_text("utf-8")
                session.open_document(rel, text)
                file_symbols = extract_symbols(session, rel)
            except (LspError, OSError, UnicodeDecodeError) as exc:
                failed.append((rel, str(exc)))
                warnings.append(f"skipped {rel}: {exc}")
                logger.warning("skipped %s: %s", rel, exc)
                continue

            lines = text.splitlines()
            file_node_ids[rel] = rel
            texts[rel] = text
            nodes.append(
                CodeNode(
                    id=rel,
                    kind="file",
                    name=Path(rel).name,
                    qualified_name=rel,
                    file_path=rel,
                    span=(1, max(1, len(lines))),
                    language=config.language,
                    code="",
                )
            )
            for symbol in file_symbols:
                start, end = symbol.span
                nodes.append(
                    CodeNode(
                        id=symbol_node_id(symbol),
                        kind=_KIND_MAP[symbol.kind],
                        name=symbol.name,
                        qualified_name=symbol.qualified_name,
                        file_path=rel,
                        span=symbol.span,
                        language=config.language,
                        code="\n".join(lines[start - 1 : end]),
                    )
                )
            symbols.extend(file_symbols)

        if not file_node_ids:
            raise ExtractionFailed(failed)
        edges = extract_call_edges(session, symbols)
        edges.extend(_file_import_edges(file_node_ids, texts))
    finally:
        session.close()

    return ExtractionResult(
        graph=build_graph(nodes, edges), warnings=warnings, failed_files=failed
    )
