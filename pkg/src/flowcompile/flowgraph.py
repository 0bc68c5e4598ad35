"""Procedure flowgraphs: parsing, validation, serialization.

The flowgraph document is the single source of truth for every downstream
stage. Format: a UTF-8 JSON object
``{"version":"1","start":...,"nodes":[...],"edges":[...]}`` with an explicit
edge list and no layout data. Graphs are immutable after construction.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field

from .errors import GraphReferenceError, GraphSyntaxError, StructureError

AGENT = "agent"
USER = "user"
ROLES = (AGENT, USER)
TERMINAL_KINDS = ("success", "abandonment", "escalation")

_NODE_KEYS = {"id", "role", "kind", "terminal_kind", "prompt_template"}
_EDGE_KEYS = {"from", "to", "condition"}
_TOP_KEYS = {"version", "start", "nodes", "edges"}


@dataclass(frozen=True)
class Node:
    id: str
    role: str
    kind: str  # "normal" | "terminal"
    terminal_kind: str | None = None
    prompt_template: str = ""

    @property
    def is_terminal(self) -> bool:
        return self.kind == "terminal"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    condition: str | None = None


@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str


@dataclass(frozen=True)
class ProcedureGraph:
    nodes: dict[str, Node]
    edges: tuple[Edge, ...]
    start: str
    version: str = "1"
    _out: dict[str, tuple[Edge, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        out: dict[str, list[Edge]] = {nid: [] for nid in self.nodes}
        for e in self.edges:
            if e.src in out:
                out[e.src].append(e)
        frozen = {
            nid: tuple(sorted(es, key=lambda e: (e.dst, e.condition or "")))
            for nid, es in out.items()
        }
        object.__setattr__(self, "_out", frozen)

    def outgoing(self, node_id: str) -> tuple[Edge, ...]:
        """Outgoing edges in deterministic (dst, condition) order."""
        return self._out[node_id]

    def terminals(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.is_terminal]

    def decision_hubs(self) -> list[str]:
        """Nodes with >= 2 outgoing edges carrying pairwise distinct conditions."""
        hubs = []
        for nid in sorted(self.nodes):
            conds = [e.condition for e in self.outgoing(nid)]
            if len(conds) >= 2 and len(set(conds)) == len(conds):
                hubs.append(nid)
        return hubs

    def placeholder_names(self) -> set[str]:
        from .scenario import extract_placeholders

        names: set[str] = set()
        for n in self.nodes.values():
            names |= extract_placeholders(n.prompt_template)
        return names


def _require(cond: bool, message: str, position=None):
    if not cond:
        raise GraphSyntaxError(message, position)


def parse_procedure(document: str) -> ProcedureGraph:
    """Parse and fully validate a flowgraph document.

    Raises GraphSyntaxError on malformed JSON or unknown/missing keys,
    GraphReferenceError when an edge names an unknown node, and
    StructureError when a graph invariant is violated.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(exc.msg, position=f"line {exc.lineno} col {exc.colno}") from exc

    _require(isinstance(doc, dict), "top-level value must be an object")
    unknown = set(doc) - _TOP_KEYS
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    for key in _TOP_KEYS:
        _require(key in doc, f"missing top-level key {key!r}")
    _require(doc["version"] == "1", f"unsupported version {doc['version']!r}")
    _require(isinstance(doc["start"], str) and doc["start"], "start must be a nonempty string")
    _require(isinstance(doc["nodes"], list), "nodes must be a list")
    _require(isinstance(doc["edges"], list), "edges must be a list")

    nodes: dict[str, Node] = {}
    for raw in doc["nodes"]:
        _require(isinstance(raw, dict), "each node must be an object")
        unknown = set(raw) - _NODE_KEYS
        _require(not unknown, f"unknown node keys: {sorted(unknown)}")
        for key in ("id", "role", "kind", "prompt_template"):
            _require(key in raw, f"node missing key {key!r}")
        nid = raw["id"]
        _require(isinstance(nid, str) and nid.strip() == nid and nid, f"bad node id {nid!r}")
        _require(nid not in nodes, f"duplicate node id {nid!r}")
        _require(raw["role"] in ROLES, f"node {nid!r}: bad role {raw['role']!r}")
        _require(raw["kind"] in ("normal", "terminal"), f"node {nid!r}: bad kind {raw['kind']!r}")
        tk = raw.get("terminal_kind")
        if tk is not None:
            _require(tk in TERMINAL_KINDS, f"node {nid!r}: bad terminal_kind {tk!r}")
        _require(isinstance(raw["prompt_template"], str), f"node {nid!r}: prompt_template must be a string")
        nodes[nid] = Node(
            id=nid,
            role=raw["role"],
            kind=raw["kind"],
            terminal_kind=tk,
            prompt_template=raw["prompt_template"],
        )

    edges: list[Edge] = []
    for raw in doc["edges"]:
        _require(isinstance(raw, dict), "each edge must be an object")
        unknown = set(raw) - _EDGE_KEYS
        _require(not unknown, f"unknown edge keys: {sorted(unknown)}")
        for key in ("from", "to"):
            _require(key in raw, f"edge missing key {key!r}")
        for endpoint in (raw["from"], raw["to"]):
            if endpoint not in nodes:
                raise GraphReferenceError(endpoint)
        cond = raw.get("condition")
        if cond is not None:
            _require(isinstance(cond, str), "edge condition must be a string")
        edges.append(Edge(src=raw["from"], dst=raw["to"], condition=cond))

    graph = ProcedureGraph(nodes=nodes, edges=tuple(edges), start=doc["start"], version=doc["version"])
    violations = validate(graph)
    if violations:
        raise StructureError(violations)
    return graph


def _reachable_from(graph: ProcedureGraph, start: str) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        nid = queue.popleft()
        for e in graph.outgoing(nid):
            if e.dst not in seen:
                seen.add(e.dst)
                queue.append(e.dst)
    return seen


def validate(graph: ProcedureGraph) -> list[Violation]:
    """Check every graph invariant; returns violations (empty list = valid)."""
    out: list[Violation] = []

    if graph.start not in graph.nodes:
        out.append(Violation("START_MISSING", graph.start, "start node not in node set"))
        return out

    for e in graph.edges:
        for endpoint in (e.src, e.dst):
            if endpoint not in graph.nodes:
                out.append(Violation("EDGE_ENDPOINT_UNKNOWN", endpoint, f"edge {e.src}->{e.dst} names unknown node"))

    for n in graph.nodes.values():
        has_tk = n.terminal_kind is not None
        if n.is_terminal != has_tk:
            out.append(Violation("TERMINAL_KIND_MISMATCH", n.id, "terminal_kind present iff kind=terminal"))
        degree = len(graph.outgoing(n.id))
        if n.is_terminal and degree > 0:
            out.append(Violation("TERMINAL_OUTGOING", n.id, "terminal node has outgoing edges"))
        if not n.is_terminal and degree == 0:
            out.append(Violation("NONTERMINAL_DEAD", n.id, "non-terminal node has no outgoing edges"))

    reachable = _reachable_from(graph, graph.start)
    for nid in sorted(graph.nodes):
        if nid not in reachable:
            out.append(Violation("UNREACHABLE", nid, "node unreachable from start"))

    terminal_ids = {n.id for n in graph.terminals()}
    for nid in sorted(graph.nodes):
        if nid in terminal_ids or nid not in reachable:
            continue
        if not (_reachable_from(graph, nid) & terminal_ids):
            out.append(Violation("NO_TERMINAL_REACHABLE", nid, "no terminal reachable from node"))

    for nid in sorted(graph.nodes):
        seen_conds: set[str | None] = set()
        for e in graph.outgoing(nid):
            cond = e.condition
            if cond is not None and (not cond.strip() or cond.strip() != cond):
                out.append(Violation("BAD_CONDITION", nid, f"condition {cond!r} not a nonempty trimmed string"))
            if len(graph.outgoing(nid)) >= 2 and cond in seen_conds:
                out.append(Violation("DUPLICATE_CONDITION", nid, f"duplicate outgoing condition {cond!r}"))
            seen_conds.add(cond)

    return out


def emit(graph: ProcedureGraph) -> str:
    """Emit the canonical document for a graph; parse(emit(g)) == g."""
    doc = {
        "version": graph.version,
        "start": graph.start,
        "nodes": [
            {
                "id": n.id,
                "role": n.role,
                "kind": n.kind,
                **({"terminal_kind": n.terminal_kind} if n.terminal_kind else {}),
                "prompt_template": n.prompt_template,
            }
            for n in (graph.nodes[nid] for nid in sorted(graph.nodes))
        ],
        "edges": [
            {
                "from": e.src,
                "to": e.dst,
                **({"condition": e.condition} if e.condition is not None else {}),
            }
            for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.condition or ""))
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def graph_hash(graph: ProcedureGraph) -> str:
    """Stable content hash of the canonical document."""
    return hashlib.sha256(emit(graph).encode("utf-8")).hexdigest()


def _prompt_order(graph: ProcedureGraph) -> list[str]:
    """BFS depth from start, then lexicographic; stable for cyclic graphs."""
    depth = {graph.start: 0}
    queue = deque([graph.start])
    while queue:
        nid = queue.popleft()
        for e in graph.outgoing(nid):
            if e.dst not in depth:
                depth[e.dst] = depth[nid] + 1
                queue.append(e.dst)
    maxd = max(depth.values(), default=0) + 1
    return sorted(graph.nodes, key=lambda nid: (depth.get(nid, maxd), nid))


PROMPT_HEADER = "PROCEDURE FLOWCHART"


def serialize_for_prompt(graph: ProcedureGraph) -> str:
    """Deterministic human-readable rendering for in-context system prompts."""
    lines = [PROMPT_HEADER, ""]
    lines.append("Nodes:")
    for nid in _prompt_order(graph):
        n = graph.nodes[nid]
        head = f"- {n.id} [{n.role}]"
        if n.is_terminal:
            head += f" (terminal: {n.terminal_kind})"
        lines.append(head)
        if n.prompt_template:
            lines.append(f"  instruction: {n.prompt_template}")
    lines.append("")
    lines.append("Transitions:")
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.condition or "")):
        if e.condition:
            lines.append(f"- {e.src} -> {e.dst} [when: {e.condition}]")
        else:
            lines.append(f"- {e.src} -> {e.dst}")
    return "\n".join(lines) + "\n"
