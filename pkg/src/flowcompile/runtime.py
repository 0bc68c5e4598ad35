"""Conversation types, the user simulator, and the two non-orchestrated
condition runners (in-context self-orchestration and compiled endpoint)."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .flowgraph import AGENT, USER, ProcedureGraph, serialize_for_prompt
from .llmgate import ChatMessage, ChatRequest, Gateway
from .scenario import ScenarioSpec, render_template

SUBTERRANEAN = "subterranean"
SURFACE_ORCHESTRATOR = "surface_orchestrator"
IN_CONTEXT = "in_context"
CONDITIONS = (SUBTERRANEAN, SURFACE_ORCHESTRATOR, IN_CONTEXT)

TERMINAL_STATES = ("success", "abandonment", "escalation", "FAILED", "TURN_CAP")
DEFAULT_END_MARKER = "<END_OF_CONVERSATION>"
DEFAULT_TURN_CAP = 60


@dataclass
class Turn:
    role: str  # agent | user
    content: str
    node_id: str | None = None
    input_tokens: int = 0
    output_tokens: int = 0
    latency_ms: float = 0.0


@dataclass
class Conversation:
    turns: list[Turn]
    condition: str
    scenario_id: int
    seed: int
    terminal: str
    wall_clock_s: float = 0.0

    def transcript(self) -> str:
        """Role-labeled transcript with no provenance (judge-safe)."""
        labels = {AGENT: "Agent", USER: "User"}
        return "\n".join(f"{labels[t.role]}: {t.content}" for t in self.turns)


@dataclass
class UserSimConfig:
    gateway: Gateway
    persona_template: str
    max_user_tokens: int = 300


def end_detection(agent_message: str, end_marker: str = DEFAULT_END_MARKER) -> bool:
    """True iff the message contains the end marker anywhere."""
    return end_marker in agent_message


def strip_marker(text: str, end_marker: str = DEFAULT_END_MARKER) -> str:
    return text.replace(end_marker, "").rstrip()


def user_turn(history: list[Turn], scenario: ScenarioSpec, cfg: UserSimConfig) -> str:
    """One simulated-user message. The prompt carries persona, scenario
    bindings, and the history -- never any flowgraph content."""
    if history and history[-1].role != AGENT:
        raise ValueError("user_turn requires the last turn to be an agent turn")
    persona = render_template(cfg.persona_template, scenario)
    details = "\n".join(f"- {k}: {v}" for k, v in sorted(scenario.bindings.items()))
    system = (
        f"{persona}\n\nYour situation:\n{details}\n\n"
        "You are role-playing this customer in a conversation with a service agent. "
        "Reply with the customer's next message only."
    )
    messages = [ChatMessage("system", system)]
    for t in history:
        # From the simulator's side, the agent speaks as "user" input.
        messages.append(ChatMessage("user" if t.role == AGENT else "assistant", t.content))
    request = ChatRequest(
        messages=tuple(messages), max_output_tokens=cfg.max_user_tokens, tag="user_sim"
    )
    return cfg.gateway.complete(request).content


@dataclass
class _LoopResult:
    turns: list[Turn]
    terminal: str


def _agent_messages(system: str, history: list[Turn]) -> tuple[ChatMessage, ...]:
    messages = [ChatMessage("system", system)]
    for t in history:
        messages.append(ChatMessage("assistant" if t.role == AGENT else "user", t.content))
    return tuple(messages)


def _marker_loop(system_prompt: str, agent_gateway: Gateway, scenario: ScenarioSpec,
                 user_sim: UserSimConfig, tag: str, end_marker: str,
                 turn_cap: int, max_agent_tokens: int) -> _LoopResult:
    """Agent/user alternation ended by the agent's end marker or the cap."""
    turns: list[Turn] = []
    while True:
        request = ChatRequest(
            messages=_agent_messages(system_prompt, turns),
            max_output_tokens=max_agent_tokens,
            tag=tag,
        )
        response = agent_gateway.complete(request)
        turns.append(Turn(
            role=AGENT,
            content=response.content,
            input_tokens=response.input_tokens,
            output_tokens=response.output_tokens,
            latency_ms=response.latency_ms,
        ))
        if end_detection(response.content, end_marker):
            return _LoopResult(turns, "success")
        if len(turns) >= turn_cap:
            return _LoopResult(turns, "TURN_CAP")
        reply = user_turn(turns, scenario, user_sim)
        turns.append(Turn(role=USER, content=reply))
        if len(turns) >= turn_cap:
            return _LoopResult(turns, "TURN_CAP")


def _is_deterministic(*gateways: Gateway) -> bool:
    return all(g.config.kind == "scripted" for g in gateways)


def _finish(result: _LoopResult, condition: str, scenario: ScenarioSpec,
            deterministic: bool, t0: float) -> Conversation:
    if deterministic:
        wall = sum(t.latency_ms for t in result.turns) / 1000.0
    else:
        wall = time.monotonic() - t0
    return Conversation(
        turns=result.turns,
        condition=condition,
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        terminal=result.terminal,
        wall_clock_s=wall,
    )


IN_CONTEXT_PREAMBLE = (
    "You are the conversational agent. Follow the procedure above exactly, "
    "one turn at a time. When the conversation has reached a terminal state, "
    "append {marker} to your final message."
)


def run_in_context(graph: ProcedureGraph, scenario: ScenarioSpec, agent_gateway: Gateway,
                   user_sim: UserSimConfig, end_marker: str = DEFAULT_END_MARKER,
                   turn_cap: int = DEFAULT_TURN_CAP, max_agent_tokens: int = 600) -> Conversation:
    """Self-orchestration: the whole serialized graph rides in the system
    prompt and the agent makes exactly one call per agent turn."""
    system = serialize_for_prompt(graph) + "\n" + IN_CONTEXT_PREAMBLE.format(marker=end_marker)
    t0 = time.monotonic()
    result = _marker_loop(system, agent_gateway, scenario, user_sim,
                          tag="agent.in_context", end_marker=end_marker,
                          turn_cap=turn_cap, max_agent_tokens=max_agent_tokens)
    return _finish(result, IN_CONTEXT, scenario,
                   _is_deterministic(agent_gateway, user_sim.gateway), t0)


def run_compiled(endpoint_gateway: Gateway, scenario: ScenarioSpec, user_sim: UserSimConfig,
                 minimal_system_prompt: str, end_marker: str = DEFAULT_END_MARKER,
                 turn_cap: int = DEFAULT_TURN_CAP, max_agent_tokens: int = 600) -> Conversation:
    """Compiled endpoint: the system prompt is exactly the minimal prompt --
    no graph serialization, no node templates."""
    t0 = time.monotonic()
    result = _marker_loop(minimal_system_prompt, endpoint_gateway, scenario, user_sim,
                          tag="agent.compiled", end_marker=end_marker,
                          turn_cap=turn_cap, max_agent_tokens=max_agent_tokens)
    return _finish(result, SUBTERRANEAN, scenario,
                   _is_deterministic(endpoint_gateway, user_sim.gateway), t0)


# --- conversation store ---

def conversation_to_dict(conv: Conversation) -> dict:
    return {
        "turns": [
            {
                "role": t.role,
                "content": t.content,
                "node_id": t.node_id,
                "input_tokens": t.input_tokens,
                "output_tokens": t.output_tokens,
                "latency_ms": t.latency_ms,
            }
            for t in conv.turns
        ],
        "condition": conv.condition,
        "scenario_id": conv.scenario_id,
        "seed": conv.seed,
        "terminal": conv.terminal,
        "wall_clock_s": conv.wall_clock_s,
    }


def conversation_from_dict(doc: dict) -> Conversation:
    return Conversation(
        turns=[Turn(**t) for t in doc["turns"]],
        condition=doc["condition"],
        scenario_id=doc["scenario_id"],
        seed=doc["seed"],
        terminal=doc["terminal"],
        wall_clock_s=doc["wall_clock_s"],
    )


def store_filename(domain: str, condition: str, seed: int) -> str:
    return f"{domain}.{condition}.{seed}.convs.jsonl"


def write_conversations(path, convs: list[Conversation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in convs:
            fh.write(json.dumps(conversation_to_dict(conv), sort_keys=True) + "\n")


def read_conversations(path) -> list[Conversation]:
    convs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                convs.append(conversation_from_dict(json.loads(line)))
    return convs
