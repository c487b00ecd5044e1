"""Retrieval benchmarking: query synthesis, Pass@k, Coverage, NDCG.

Queries are synthesized from function summaries in two backend stages,
first condensing the structured summary and then emitting short search
queries capped at ten words. Retrieval runs against the code and the
summary collections with identical query embeddings, and the report
carries both the absolute metric values and the summary-over-code
improvement rows (absolute percentage points and relative percent).
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import EmbedBackend, embed
from .graph import CodeGraph
from .index import Collection
from .summarize.backends import TextBackend
from .summarize.schema import StructuredSummary

logger = logging.getLogger(__name__)

MAX_QUERY_WORDS = 10
DEFAULT_KS = (1, 3, 5, 10)


class BenchmarkError(Exception):
    pass


class EmptyBenchmark(BenchmarkError):
    pass


class MissingResults(BenchmarkError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no result list for query {query_id!r}")


class NodeSetMismatch(BenchmarkError):
    pass


@dataclass(frozen=True)
class BenchmarkQuery:
    query_id: str
    text: str
    origin_node_id: str
    relevant_ids: frozenset[str]

    def __post_init__(self):
        if len(self.text.split()) > MAX_QUERY_WORDS:
            raise ValueError(f"query {self.query_id!r} exceeds {MAX_QUERY_WORDS} words")
        if not self.relevant_ids:
            raise ValueError(f"query {self.query_id!r} has no relevant ids")
        if self.origin_node_id not in self.relevant_ids:
            raise ValueError(f"query {self.query_id!r}: origin must be among the relevant ids")


def _condense_prompt(summary: StructuredSummary) -> str:
    deps = ", ".join(d["name"] for d in summary.dependencies) or "none"
    details = " ".join(summary.details.split())
    return (
        "Condense the following structured summary of a code function,"
        " preserving critical technical details.\n\n"
        f"Function: {summary.name}\n"
        f"Purpose: {summary.purpose}\n"
        f"Details: {details}\n"
        f"Dependencies: {deps}\n\n"
        "Reply with one short paragraph."
    )


def _query_prompt(summary: StructuredSummary, condensed: str, count: int) -> str:
    details = " ".join(summary.details.split())
    return (
        f"Write {count} short search queries, one per line and each at most"
        f" {MAX_QUERY_WORDS} words, that a developer might use to find the"
        " function described below. Focus on the function's purpose and behavior.\n\n"
        f"Condensed summary: {condensed}\n"
        f"Purpose: {summary.purpose}\n"
        f"Details: {details}\n"
    )


def generate_queries(
    summaries: list[StructuredSummary],
    backend: TextBackend,
    per_function: int = 1,
) -> list[BenchmarkQuery]:
    """Synthesize up to ``per_function`` queries per summary.

    Each query is annotated with its origin function as the relevant
    item. Over-long backend output is truncated to ten words with a
    warning; backends may return fewer lines than requested.
    """
    if not summaries:
        raise EmptyBenchmark("no summaries to generate queries from")
    if per_function < 1:
        raise ValueError("per_function must be >= 1")

    queries: list[BenchmarkQuery] = []
    for summary in sorted(summaries, key=lambda s: s.node_id):
        condensed = backend.generate(_condense_prompt(summary)).strip()
        raw = backend.generate(_query_prompt(summary, condensed, per_function))
        lines = [line.strip().lstrip("-*").strip() for line in raw.splitlines()]
        lines = [line for line in lines if line]
        if len(lines) < per_function:
            logger.warning(
                "backend produced %d/%d queries for %s", len(lines), per_function, summary.node_id
            )
        for i, line in enumerate(lines[:per_function], start=1):
            words = line.split()
            if len(words) > MAX_QUERY_WORDS:
                logger.warning("truncating %d-word query for %s", len(words), summary.node_id)
                line = " ".join(words[:MAX_QUERY_WORDS])
            queries.append(
                BenchmarkQuery(
                    query_id=f"{summary.node_id}#q{i}",
                    text=line,
                    origin_node_id=summary.node_id,
                    relevant_ids=frozenset({summary.node_id}),
                )
            )
    return queries


def _check(queries: list[BenchmarkQuery], results: dict[str, list[str]]) -> None:
    if not queries:
        raise EmptyBenchmark("metric over an empty query set")
    for query in queries:
        if query.query_id not in results:
            raise MissingResults(query.query_id)


def pass_at_k(queries: list[BenchmarkQuery], results: dict[str, list[str]], k: int) -> float:
    """Percent of queries with a relevant item among the top k results."""
    _check(queries, results)
    hits = sum(
        1 for q in queries if q.relevant_ids.intersection(results[q.query_id][:k])
    )
    return 100.0 * hits / len(queries)


def coverage(queries: list[BenchmarkQuery], results: dict[str, list[str]], k: int) -> float:
    """Percent of all annotated relevant items retrieved within top k."""
    _check(queries, results)
    annotated: set[str] = set()
    retrieved: set[str] = set()
    for q in queries:
        annotated |= q.relevant_ids
        retrieved |= q.relevant_ids.intersection(results[q.query_id][:k])
    return 100.0 * len(retrieved) / len(annotated)


def ndcg_at_k(queries: list[BenchmarkQuery], results: dict[str, list[str]], k: int) -> float:
    """Mean NDCG@k with binary relevance.

    Per query, DCG sums 1/log2(rank+1) over relevant results within the
    top k; the ideal DCG places all relevant items first.
    """
    _check(queries, results)
    total = 0.0
    for q in queries:
        dcg = sum(
            1.0 / math.log2(rank + 1)
            for rank, node_id in enumerate(results[q.query_id][:k], start=1)
            if node_id in q.relevant_ids
        )
        ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(q.relevant_ids)) + 1))
        total += dcg / ideal
    return total / len(queries)


@dataclass
class Improvement:
    absolute: float
    relative: float | None  # percent, None when the baseline is zero

    def rounded_absolute(self) -> float:
        return round(self.absolute, 2)

    def rounded_relative(self) -> int | None:
        return None if self.relative is None else round(self.relative)


def improvement_rows(
    code_pass_at: dict[int, float], summary_pass_at: dict[int, float]
) -> dict[int, Improvement]:
    """Summary-over-code improvement per k: absolute percentage points
    and relative percent of the code baseline."""
    rows: dict[int, Improvement] = {}
    for k in sorted(code_pass_at):
        absolute = summary_pass_at[k] - code_pass_at[k]
        baseline = code_pass_at[k]
        rows[k] = Improvement(
            absolute=absolute,
            relative=(absolute / baseline * 100.0) if baseline != 0 else None,
        )
    return rows


@dataclass
class CollectionMetrics:
    pass_at: dict[int, float]
    coverage: float
    ndcg: float


@dataclass
class MetricsReport:
    ks: list[int]
    queries: int
    code: CollectionMetrics
    summary: CollectionMetrics
    improvements: dict[int, Improvement]
    coverage_k: int
    ndcg_k: int
    notes: list[str] = field(default_factory=list)

    def violations(self) -> list[str]:
        """Internal consistency problems; an empty list means a valid report."""
        problems = []
        for metrics, label in ((self.code, "code"), (self.summary, "summary")):
            values = [metrics.pass_at[k] for k in self.ks]
            if any(b < a - 1e-9 for a, b in zip(values, values[1:])):
                problems.append(f"{label}: Pass@k is not non-decreasing in k")
            for k, value in metrics.pass_at.items():
                if not 0.0 <= value <= 100.0:
                    problems.append(f"{label}: Pass@{k} out of range: {value}")
            if not 0.0 <= metrics.coverage <= 100.0:
                problems.append(f"{label}: coverage out of range: {metrics.coverage}")
            if not 0.0 <= metrics.ndcg <= 1.0:
                problems.append(f"{label}: NDCG out of range: {metrics.ndcg}")
        return problems

    def to_json_dict(self) -> dict:
        return {
            "ks": self.ks,
            "queries": self.queries,
            "coverage_k": self.coverage_k,
            "ndcg_k": self.ndcg_k,
            "collections": {
                label: {
                    "pass_at": {str(k): v for k, v in metrics.pass_at.items()},
                    "coverage": metrics.coverage,
                    "ndcg": metrics.ndcg,
                }
                for label, metrics in (("code", self.code), ("summary", self.summary))
            },
            "improvements": {
                str(k): {
                    "absolute": imp.absolute,
                    "absolute_rounded": imp.rounded_absolute(),
                    "relative": imp.relative,
                    "relative_rounded": imp.rounded_relative(),
                }
                for k, imp in self.improvements.items()
            },
            "notes": self.notes,
        }

    def render_text(self) -> str:
        lines = ["Retrieval benchmark report", "=" * 60]
        lines.extend(self.notes)
        lines.append(f"queries: {self.queries}")
        lines.append(f"coverage cutoff k={self.coverage_k}; NDCG cutoff k={self.ndcg_k}")
        lines.append("")
        header = f"{'collection':<12s}" + "".join(f"{'Pass@' + str(k):>10s}" for k in self.ks)
        header += f"{'coverage':>10s}{'ndcg':>8s}"
        lines.append(header)
        for label, metrics in (("code", self.code), ("summary", self.summary)):
            row = f"{label:<12s}"
            for k in self.ks:
                row += f"{metrics.pass_at[k]:10.2f}"
            row += f"{metrics.coverage:10.2f}{metrics.ndcg:8.4f}"
            lines.append(row)
        lines.append("")
        lines.append("improvement of summary over code (Pass@k)")
        lines.append("k     absolute (pp)   relative")
        for k in self.ks:
            imp = self.improvements[k]
            rel = "n/a" if imp.relative is None else f"{imp.rounded_relative():+d}%"
            lines.append(f"{k:<5d} {imp.rounded_absolute():+14.2f}   {rel}")
        return "\n".join(lines) + "\n"


def run_benchmark(
    graph: CodeGraph | None,
    code_collection: Collection,
    summary_collection: Collection,
    queries: list[BenchmarkQuery],
    embed_backend: EmbedBackend,
    ks: tuple[int, ...] = DEFAULT_KS,
    workers: int = 4,
    notes: list[str] | None = None,
) -> MetricsReport:
    """Evaluate both collections with identical query embeddings.

    The two collections must index the same node set. Coverage and NDCG
    are reported at the largest k.
    """
    if not queries:
        raise EmptyBenchmark("no queries to evaluate")
    if set(code_collection.ids()) != set(summary_collection.ids()):
        raise NodeSetMismatch("code and summary collections index different node sets")
    if graph is not None:
        for query in queries:
            if query.origin_node_id not in graph.nodes:
                logger.warning("query %s originates outside the graph", query.query_id)

    ordered = sorted(queries, key=lambda q: q.query_id)
    max_k = max(ks)

    def evaluate(query: BenchmarkQuery) -> tuple[str, list[str], list[str]]:
        vector = np.asarray(embed(query.text, embed_backend))
        code_ids = [h.node_id for h in code_collection.search(vector, max_k)]
        summary_ids = [h.node_id for h in summary_collection.search(vector, max_k)]
        return query.query_id, code_ids, summary_ids

    code_results: dict[str, list[str]] = {}
    summary_results: dict[str, list[str]] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for query_id, code_ids, summary_ids in pool.map(evaluate, ordered):
            code_results[query_id] = code_ids
            summary_results[query_id] = summary_ids

    def metrics(results: dict[str, list[str]]) -> CollectionMetrics:
        return CollectionMetrics(
            pass_at={k: pass_at_k(ordered, results, k) for k in ks},
            coverage=coverage(ordered, results, max_k),
            ndcg=ndcg_at_k(ordered, results, max_k),
        )

    code_metrics = metrics(code_results)
    summary_metrics = metrics(summary_results)
    return MetricsReport(
        ks=list(ks),
        queries=len(ordered),
        code=code_metrics,
        summary=summary_metrics,
        improvements=improvement_rows(code_metrics.pass_at, summary_metrics.pass_at),
        coverage_k=max_k,
        ndcg_k=max_k,
        notes=list(notes or []),
    )


def write_queries_jsonl(queries: list[BenchmarkQuery], path: str | Path) -> bytes:
    lines = [
        json.dumps(
            {
                "query_id": q.query_id,
                "text": q.text,
                "origin_node_id": q.origin_node_id,
                "relevant_ids": sorted(q.relevant_ids),
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        for q in sorted(queries, key=lambda q: q.query_id)
    ]
    data = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    from .index import _atomic_write

    _atomic_write(Path(path), data)
    return data


def read_queries_jsonl(path: str | Path) -> list[BenchmarkQuery]:
    queries = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                payload = json.loads(line)
                queries.append(
                    BenchmarkQuery(
                        query_id=payload["query_id"],
                        text=payload["text"],
                        origin_node_id=payload["origin_node_id"],
                        relevant_ids=frozenset(payload["relevant_ids"]),
                    )
                )
    return queries
