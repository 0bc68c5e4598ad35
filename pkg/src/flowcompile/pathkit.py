"""Path enumeration and seeded path sampling over procedure flowgraphs."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DeadEnd, PathExplosion
from .flowgraph import ProcedureGraph
from .rng import SplitMix64

DEFAULT_PATH_CAP = 1_000_000


@dataclass(frozen=True)
class Path:
    node_ids: tuple[str, ...]
    terminal_kind: str

    def __len__(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class PathStats:
    path_count: int
    min_turns: int
    max_turns: int


def enumerate_acyclic_paths(graph: ProcedureGraph, cap: int = DEFAULT_PATH_CAP) -> list[Path]:
    """All simple start-to-terminal paths, in deterministic lexicographic order.

    Outgoing edges are explored in the graph's canonical (dst, condition)
    order, so the result order is stable. Raises PathExplosion once more than
    `cap` paths have been found.
    """
    paths: list[Path] = []
    stack = [graph.start]
    on_path = {graph.start}

    def walk(nid: str):
        node = graph.nodes[nid]
        if node.is_terminal:
            if len(paths) >= cap:
                raise PathExplosion(f"more than {cap} acyclic paths")
            paths.append(Path(node_ids=tuple(stack), terminal_kind=node.terminal_kind))
            return
        for e in graph.outgoing(nid):
            if e.dst in on_path:
                continue
            stack.append(e.dst)
            on_path.add(e.dst)
            walk(e.dst)
            stack.pop()
            on_path.discard(e.dst)

    walk(graph.start)
    return paths


def path_stats(paths: list[Path]) -> PathStats:
    """Count and min/max path length in nodes (one node = one turn)."""
    if not paths:
        return PathStats(0, 0, 0)
    lengths = [len(p) for p in paths]
    return PathStats(len(paths), min(lengths), max(lengths))


def sample_path(graph: ProcedureGraph, seed: int, max_visits_per_node: int = 2) -> Path:
    """Seeded random walk from start to a terminal.

    At each node the walk chooses uniformly among outgoing edges whose target
    still has visit budget. With max_visits_per_node=1 the result is a simple
    path. Raises DeadEnd when no admissible edge remains at a non-terminal.
    """
    if max_visits_per_node < 1:
        raise ValueError("max_visits_per_node must be >= 1")
    rng = SplitMix64(seed)
    visits = {graph.start: 1}
    nodes = [graph.start]
    nid = graph.start
    while not graph.nodes[nid].is_terminal:
        admissible = [
            e for e in graph.outgoing(nid)
            if visits.get(e.dst, 0) < max_visits_per_node
        ]
        if not admissible:
            raise DeadEnd(nid)
        edge = admissible[rng.randrange(len(admissible))]
        nid = edge.dst
        visits[nid] = visits.get(nid, 0) + 1
        nodes.append(nid)
    return Path(node_ids=tuple(nodes), terminal_kind=graph.nodes[nid].terminal_kind)


def verify_path(graph: ProcedureGraph, path: Path) -> bool:
    """Independent edge-by-edge recheck of a path against the graph."""
    ids = path.node_ids
    if not ids or ids[0] != graph.start:
        return False
    last = graph.nodes.get(ids[-1])
    if last is None or not last.is_terminal or last.terminal_kind != path.terminal_kind:
        return False
    edge_set = {(e.src, e.dst) for e in graph.edges}
    return all((a, b) in edge_set for a, b in zip(ids, ids[1:]))


def export_paths(paths: list[Path]) -> str:
    """Line-delimited JSON export of a path list."""
    return "".join(
        json.dumps({"nodes": list(p.node_ids), "terminal_kind": p.terminal_kind}) + "\n"
        for p in paths
    )
