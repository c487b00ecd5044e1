"""codestrata: function-level code graphs, level-order bottom-up
summaries, dense-vector indexing, and summary-enhanced retrieval."""

__version__ = "0.1.0"

from .graph import CodeEdge, CodeGraph, CodeNode, build_graph, graph_to_json, json_to_graph
from .levels import LevelPlan, all_deps_processed, break_cycle, build_levels

__all__ = [
    "CodeEdge",
    "CodeGraph",
    "CodeNode",
    "LevelPlan",
    "__version__",
    "all_deps_processed",
    "break_cycle",
    "build_graph",
    "build_levels",
    "graph_to_json",
    "json_to_graph",
]
