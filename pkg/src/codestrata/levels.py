"""Level-order decomposition of a code graph with deterministic cycle breaking.

Nodes are grouped into ordered levels so that every call dependency of a
node sits in a strictly lower level, which lets a whole level be
processed in parallel once the levels below it are done. When all
remaining nodes are stuck on cycles, the node with the fewest
unprocessed callees (ties by smallest id) is forced through and its
waived dependency edges are recorded, so the construction terminates on
any input.

Callees that are not tracked in the remaining set, in particular calls
into code outside the graph, count as already processed: a library call
must never block leveling.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence, Set
from dataclasses import dataclass, field

from .graph import CodeGraph


@dataclass(frozen=True)
class LevelPlan:
    """Ordered levels plus the call edges waived to break cycles.

    Every node id of the source graph appears in exactly one level, ids
    within a level are sorted ascending, and for every call edge
    (a -> b) not listed in ``broken_edges`` the callee's level is
    strictly lower than the caller's.
    """

    levels: list[list[str]] = field(default_factory=list)
    broken_edges: list[tuple[str, str]] = field(default_factory=list)

    def level_index(self) -> dict[str, int]:
        return {nid: i for i, level in enumerate(self.levels) for nid in level}


def all_deps_processed(
    node_id: str,
    adjacency: Mapping[str, Sequence[str]],
    remaining: Set[str],
) -> bool:
    """True iff no callee of ``node_id`` is still waiting in ``remaining``."""
    return all(callee not in remaining for callee in adjacency.get(node_id, ()))


def break_cycle(remaining: Set[str], adjacency: Mapping[str, Sequence[str]]) -> str:
    """Pick the node to force through a cycle.

    Chooses the node with the fewest unprocessed callees, breaking ties
    by lexicographically smallest id, which minimizes waived edges per
    break and keeps the result deterministic.
    """
    if not remaining:
        raise ValueError("break_cycle requires a non-empty remaining set")

    def unprocessed(nid: str) -> int:
        return sum(1 for callee in adjacency.get(nid, ()) if callee in remaining)

    return min(remaining, key=lambda nid: (unprocessed(nid), nid))


def build_levels(graph: CodeGraph) -> LevelPlan:
    """Decompose ``graph`` into dependency levels; total on any input."""
    adjacency = graph.adjacency
    remaining = set(graph.nodes)

    callers: dict[str, list[str]] = {nid: [] for nid in remaining}
    pending: dict[str, int] = {}
    for nid in remaining:
        callees = adjacency.get(nid, ())
        pending[nid] = len(callees)
        for callee in callees:
            callers[callee].append(nid)

    levels: list[list[str]] = []
    broken: list[tuple[str, str]] = []
    ready = sorted(nid for nid, count in pending.items() if count == 0)

    while remaining:
        if ready:
            level = ready
        else:
            nid = break_cycle(remaining, adjacency)
            for callee in adjacency.get(nid, ()):
                if callee in remaining:
                    broken.append((nid, callee))
            level = [nid]

        for nid in level:
            remaining.discard(nid)
        newly_ready: list[str] = []
        for nid in level:
            for caller in callers.get(nid, ()):
                if caller in remaining:
                    pending[caller] -= 1
                    if pending[caller] == 0:
                        newly_ready.append(caller)
        levels.append(level)
        ready = sorted(newly_ready)

    return LevelPlan(levels=levels, broken_edges=broken)
