"""Blind LLM-as-judge scoring on the five-criterion rubric, dual-judge joins,
failure classification, and conversation analytics."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .errors import JudgeParseError
from .flowgraph import AGENT
from .llmgate import ChatMessage, ChatRequest, Gateway
from .runtime import Conversation

log = logging.getLogger(__name__)

CRITERIA = (
    "Task Success",
    "Information Accuracy",
    "Consistency",
    "Graceful Handling",
    "Naturalness",
)

# Reply-block labels, in criterion order.
_LABELS = ("TaskSuccess", "InformationAccuracy", "Consistency", "GracefulHandling", "Naturalness")
_LABEL_TO_CRITERION = dict(zip(_LABELS, CRITERIA))

GRACEFUL = "Graceful Handling"
TASK_SUCCESS = "Task Success"


@dataclass(frozen=True)
class Rubric:
    criteria: tuple  # 5 of {"name": str, "anchors": {level: text}}
    graceful_cap_without_challenges: bool = True

    def __post_init__(self):
        names = tuple(c["name"] for c in self.criteria)
        if names != CRITERIA:
            raise ValueError(f"rubric must carry exactly the five criteria {CRITERIA}, got {names}")


@dataclass
class Scorecard:
    scenario_id: int
    condition: str
    judge: str
    scores: dict  # criterion name -> int 1..5
    rationale: str
    challenge_flag: bool

    def __post_init__(self):
        missing = set(CRITERIA) - set(self.scores)
        if missing:
            raise ValueError(f"missing criteria: {sorted(missing)}")
        for name, value in self.scores.items():
            if not (1 <= value <= 5):
                raise ValueError(f"{name} score {value} out of [1, 5]")
        if not self.challenge_flag and self.scores[GRACEFUL] > 3:
            raise ValueError("Graceful Handling > 3 with no challenges posed")


def load_rubric(text: str) -> Rubric:
    doc = json.loads(text)
    return Rubric(
        criteria=tuple(doc["criteria"]),
        graceful_cap_without_challenges=doc.get("special_rules", {})
        .get("graceful_cap_without_challenges", True),
    )


def rubric_prompt(rubric: Rubric) -> str:
    parts = ["Score the conversation on each criterion from 1 to 5:"]
    for c in rubric.criteria:
        parts.append(f"\n{c['name']}:")
        for level in sorted(c["anchors"], reverse=True):
            parts.append(f"  {level} = {c['anchors'][level]}")
    parts.append(
        "\nReply with exactly this block:\n"
        + "\n".join(f"{label}: <1-5>" for label in _LABELS)
        + "\nChallenges: <yes|no>  (did the user pose any challenges, changes, or edge cases?)"
        + "\nRationale: <one or two sentences>"
    )
    return "\n".join(parts)


_SCORE_LINE = re.compile(r"^\s*(\w+)\s*:\s*([1-5])\s*$", re.MULTILINE)
_CHALLENGE_LINE = re.compile(r"^\s*Challenges\s*:\s*(yes|no)\s*$", re.IGNORECASE | re.MULTILINE)
_RATIONALE_LINE = re.compile(r"^\s*Rationale\s*:\s*(.*)$", re.MULTILINE | re.DOTALL)


def _parse_reply(raw: str) -> tuple[dict, bool, str]:
    scores = {}
    for label, value in _SCORE_LINE.findall(raw):
        criterion = _LABEL_TO_CRITERION.get(label)
        if criterion:
            scores[criterion] = int(value)
    challenge = _CHALLENGE_LINE.search(raw)
    if len(scores) != 5 or challenge is None:
        raise JudgeParseError(raw)
    rationale = _RATIONALE_LINE.search(raw)
    return scores, challenge.group(1).lower() == "yes", rationale.group(1).strip() if rationale else ""


def score_conversation(conv: Conversation, rubric: Rubric, judge_gateway: Gateway,
                       judge_label: str = "judge") -> Scorecard:
    """Blind scoring: the judge sees the role-labeled transcript only -- no
    condition label, node ids, seeds, or provenance. Unparseable replies are
    retried once, then JudgeParseError."""
    if not conv.turns:
        raise ValueError("cannot score an empty conversation")
    system = (
        "You are evaluating the quality of a customer-service conversation. "
        "You do not know which system produced it.\n\n" + rubric_prompt(rubric)
    )
    user = "Conversation transcript:\n\n" + conv.transcript()
    request = ChatRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        max_output_tokens=300,
        tag="judge",
    )
    raw = judge_gateway.complete(request).content
    try:
        scores, challenge_flag, rationale = _parse_reply(raw)
    except JudgeParseError:
        raw = judge_gateway.complete(request).content
        scores, challenge_flag, rationale = _parse_reply(raw)

    if rubric.graceful_cap_without_challenges and not challenge_flag and scores[GRACEFUL] > 3:
        log.info("graceful-handling cap applied (scenario %d: %d -> 3)",
                 conv.scenario_id, scores[GRACEFUL])
        scores[GRACEFUL] = 3
    return Scorecard(
        scenario_id=conv.scenario_id,
        condition=conv.condition,
        judge=judge_label,
        scores=scores,
        rationale=rationale,
        challenge_flag=challenge_flag,
    )


def failure_rate(cards: list[Scorecard]) -> float:
    """Fraction of conversations with Task Success <= 3."""
    if not cards:
        raise ValueError("cards must be nonempty")
    return sum(1 for c in cards if c.scores[TASK_SUCCESS] <= 3) / len(cards)


@dataclass(frozen=True)
class ConversationAnalytics:
    avg_turns: float
    avg_wall_clock_s: float
    avg_words: float
    one_question_turn_fraction: float


def analyze_conversations(convs: list[Conversation]) -> ConversationAnalytics:
    """Turn counts, word counts (whitespace split), and the fraction of agent
    turns containing exactly one '?'."""
    if not convs:
        raise ValueError("convs must be nonempty")
    turns = [len(c.turns) for c in convs]
    words = [sum(len(t.content.split()) for t in c.turns) for c in convs]
    agent_turns = [t for c in convs for t in c.turns if t.role == AGENT]
    one_q = sum(1 for t in agent_turns if t.content.count("?") == 1)
    return ConversationAnalytics(
        avg_turns=sum(turns) / len(convs),
        avg_wall_clock_s=sum(c.wall_clock_s for c in convs) / len(convs),
        avg_words=sum(words) / len(convs),
        one_question_turn_fraction=one_q / len(agent_turns) if agent_turns else 0.0,
    )


def criterion_ratio(cards_a: list[Scorecard], cards_b: list[Scorecard], criterion: str) -> float:
    """mean(a) / mean(b) on one criterion."""
    if not cards_a or not cards_b:
        raise ValueError("both card sets must be nonempty")
    mean_a = sum(c.scores[criterion] for c in cards_a) / len(cards_a)
    mean_b = sum(c.scores[criterion] for c in cards_b) / len(cards_b)
    return mean_a / mean_b


def join_dual(cards_a: list[Scorecard], cards_b: list[Scorecard]):
    """1:1 join of two judges' scorecards on (scenario_id, condition)."""
    index_a = {(c.scenario_id, c.condition): c for c in cards_a}
    index_b = {(c.scenario_id, c.condition): c for c in cards_b}
    if set(index_a) != set(index_b) or len(index_a) != len(cards_a) or len(index_b) != len(cards_b):
        raise ValueError("dual-judge sets are not joinable 1:1")
    return [(index_a[k], index_b[k]) for k in sorted(index_a)]


def scorecard_to_dict(card: Scorecard) -> dict:
    return {
        "scenario_id": card.scenario_id,
        "condition": card.condition,
        "judge": card.judge,
        "scores": card.scores,
        "rationale": card.rationale,
        "challenge_flag": card.challenge_flag,
    }


def scorecard_from_dict(doc: dict) -> Scorecard:
    return Scorecard(**doc)


def write_scorecards(path, cards: list[Scorecard]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for card in cards:
            fh.write(json.dumps(scorecard_to_dict(card), sort_keys=True) + "\n")


def read_scorecards(path) -> list[Scorecard]:
    cards = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                cards.append(scorecard_from_dict(json.loads(line)))
    return cards
