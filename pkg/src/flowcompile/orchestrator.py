"""Surface-orchestration runtime: walk the graph turn by turn, inject node
templates, and route at decision hubs with an LLM classifier."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

from .errors import RoutingFailure, TemplateError, UnboundPlaceholder
from .flowgraph import AGENT, ProcedureGraph
from .llmgate import ChatMessage, ChatRequest, Gateway
from .runtime import (
    SURFACE_ORCHESTRATOR,
    Conversation,
    Turn,
    UserSimConfig,
    _agent_messages,
    _is_deterministic,
    user_turn,
)
from .scenario import ScenarioSpec, render_template

DEFAULT_ROUTE_ATTEMPTS = 2
DEFAULT_TURN_CAP = 60

FAILURE = None  # sentinel for RoutingRecord.chosen

_INT = re.compile(r"\d+")


@dataclass
class RoutingRecord:
    hub: str
    candidates: list[tuple[int, str]]  # (1-based option number, condition label)
    classifier_raw: str
    chosen: int | None  # option number, or None on failure
    attempts: int


@dataclass
class OrchestratorSession:
    graph: ProcedureGraph
    scenario: ScenarioSpec
    current_node: str
    history: list[Turn] = field(default_factory=list)
    routing_log: list[RoutingRecord] = field(default_factory=list)
    failed: bool = False


def new_session(graph: ProcedureGraph, scenario: ScenarioSpec) -> OrchestratorSession:
    return OrchestratorSession(graph=graph, scenario=scenario, current_node=graph.start)


AGENT_SYSTEM = (
    "You are a customer-service agent. Follow the instruction for the current "
    "step of the conversation.\n\nCurrent step instruction: {instruction}\n\n"
    "Respond with the agent's next message only."
)


def agent_turn(session: OrchestratorSession, agent_gateway: Gateway,
               max_agent_tokens: int = 600) -> str:
    """Render the current node's template, call the agent model, append the
    reply to history. Does not advance the node."""
    node = session.graph.nodes[session.current_node]
    if node.role != AGENT:
        raise ValueError(f"agent_turn at non-agent node {node.id!r}")
    try:
        instruction = render_template(node.prompt_template, session.scenario)
    except UnboundPlaceholder as exc:
        raise TemplateError(f"node {node.id!r}: {exc}") from exc
    request = ChatRequest(
        messages=_agent_messages(AGENT_SYSTEM.format(instruction=instruction), session.history),
        max_output_tokens=max_agent_tokens,
        tag="agent.orchestrated",
    )
    response = agent_gateway.complete(request)
    session.history.append(Turn(
        role=AGENT,
        content=response.content,
        node_id=node.id,
        input_tokens=response.input_tokens,
        output_tokens=response.output_tokens,
        latency_ms=response.latency_ms,
    ))
    return response.content


ROUTER_SYSTEM = (
    "You are a routing classifier for a customer-service procedure. Given the "
    "conversation so far, pick which branch applies next."
)


def _transcript(history: list[Turn]) -> str:
    labels = {"agent": "Agent", "user": "User"}
    return "\n".join(f"{labels[t.role]}: {t.content}" for t in history)


def _parse_choice(raw: str, k: int) -> int | None:
    for token in _INT.findall(raw):
        value = int(token)
        if 1 <= value <= k:
            return value
    return None


def route(session: OrchestratorSession, router_gateway: Gateway,
          max_attempts: int = DEFAULT_ROUTE_ATTEMPTS) -> str:
    """Pick the next node. Single edge: follow it with zero LLM calls.
    Several edges: ask the classifier; on exhausted retries the session is
    marked FAILED and RoutingFailure is raised."""
    edges = session.graph.outgoing(session.current_node)
    if not edges:
        raise ValueError(f"route() at terminal node {session.current_node!r}")
    if len(edges) == 1:
        session.current_node = edges[0].dst
        return session.current_node

    candidates = [(i + 1, e.condition or "(unconditional)") for i, e in enumerate(edges)]
    option_lines = "\n".join(f"{num}. {label}" for num, label in candidates)
    prompt = (
        f"Conversation so far:\n{_transcript(session.history)}\n\n"
        f"Possible next branches:\n{option_lines}\n\n"
        f"Which branch applies? Reply with a single number between 1 and {len(edges)}."
    )
    raw = ""
    for attempt in range(1, max_attempts + 1):
        request = ChatRequest(
            messages=(ChatMessage("system", ROUTER_SYSTEM), ChatMessage("user", prompt)),
            max_output_tokens=16,
            tag="route",
        )
        raw = router_gateway.complete(request).content
        choice = _parse_choice(raw, len(edges))
        if choice is not None:
            session.routing_log.append(RoutingRecord(
                hub=session.current_node,
                candidates=candidates,
                classifier_raw=raw,
                chosen=choice,
                attempts=attempt,
            ))
            session.current_node = edges[choice - 1].dst
            return session.current_node
    session.routing_log.append(RoutingRecord(
        hub=session.current_node,
        candidates=candidates,
        classifier_raw=raw,
        chosen=FAILURE,
        attempts=max_attempts,
    ))
    session.failed = True
    raise RoutingFailure(session.current_node, raw)


def run_orchestrated(graph: ProcedureGraph, scenario: ScenarioSpec, agent_gateway: Gateway,
                     router_gateway: Gateway, user_sim: UserSimConfig,
                     turn_cap: int = DEFAULT_TURN_CAP,
                     route_attempts: int = DEFAULT_ROUTE_ATTEMPTS) -> Conversation:
    """Alternate agent / simulated-user turns along the graph until a terminal
    node, a routing failure, or the turn cap."""
    session = new_session(graph, scenario)
    t0 = time.monotonic()
    terminal = "TURN_CAP"
    while len(session.history) < turn_cap:
        node = graph.nodes[session.current_node]
        if node.role == AGENT:
            agent_turn(session, agent_gateway)
        else:
            reply = user_turn(session.history, scenario, user_sim)
            session.history.append(Turn(role="user", content=reply, node_id=node.id))
        if node.is_terminal:
            terminal = node.terminal_kind
            break
        try:
            route(session, router_gateway, max_attempts=route_attempts)
        except RoutingFailure:
            terminal = "FAILED"
            break

    deterministic = _is_deterministic(agent_gateway, router_gateway, user_sim.gateway)
    if deterministic:
        wall = sum(t.latency_ms for t in session.history) / 1000.0
    else:
        wall = time.monotonic() - t0
    conv = Conversation(
        turns=session.history,
        condition=SURFACE_ORCHESTRATOR,
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        terminal=terminal,
        wall_clock_s=wall,
    )
    conv.routing_log = session.routing_log
    return conv


def export_routing_log(records: list[RoutingRecord]) -> str:
    import json

    return "".join(
        json.dumps({
            "hub": r.hub,
            "candidates": [[n, c] for n, c in r.candidates],
            "classifier_raw": r.classifier_raw,
            "chosen": r.chosen,
            "attempts": r.attempts,
        }) + "\n"
        for r in records
    )
