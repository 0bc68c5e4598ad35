import pytest

from flowcompile.errors import JudgeParseError
from flowcompile.judge import (
    CRITERIA,
    Rubric,
    Scorecard,
    analyze_conversations,
    criterion_ratio,
    failure_rate,
    join_dual,
    load_rubric,
    read_scorecards,
    rubric_prompt,
    score_conversation,
    write_scorecards,
)
from flowcompile.runtime import Conversation, Turn

from conftest import fixture_text, scripted_gateway

GOOD_REPLY = (
    "TaskSuccess: 5\nInformationAccuracy: 4\nConsistency: 5\n"
    "GracefulHandling: 4\nNaturalness: 3\nChallenges: yes\n"
    "Rationale: Handled the change of plans well."
)


def rubric():
    return load_rubric(fixture_text("rubric.json"))


def conv(contents=("Hello, how can I help?", "I need a trip."), condition="in_context"):
    turns = [Turn(role="agent" if i % 2 == 0 else "user", content=c)
             for i, c in enumerate(contents)]
    return Conversation(turns=turns, condition=condition, scenario_id=3, seed=1,
                        terminal="success", wall_clock_s=0.01)


def test_load_rubric_fixture():
    r = rubric()
    assert tuple(c["name"] for c in r.criteria) == CRITERIA
    assert r.graceful_cap_without_challenges
    text = rubric_prompt(r)
    assert "TaskSuccess: <1-5>" in text
    assert "Challenges: <yes|no>" in text
    assert "Rationale:" in text


def test_rubric_rejects_wrong_criteria():
    with pytest.raises(ValueError):
        Rubric(criteria=({"name": "Speed", "anchors": {}},) * 5)


def test_score_conversation_parses_reply():
    card = score_conversation(conv(), rubric(), scripted_gateway(script=[GOOD_REPLY]))
    assert card.scores["Task Success"] == 5
    assert card.scores["Naturalness"] == 3
    assert card.challenge_flag
    assert card.rationale.startswith("Handled")
    assert card.condition == "in_context"
    assert card.scenario_id == 3


def test_judge_prompt_is_blind():
    gw = scripted_gateway(script=[GOOD_REPLY])
    score_conversation(conv(condition="subterranean"), rubric(), gw)
    request = gw.provider.requests[0]
    text = " ".join(m.content for m in request.messages)
    for forbidden in ("subterranean", "in_context", "surface_orchestrator",
                      "greet_open", "node", "seed"):
        assert forbidden not in text


def test_graceful_cap_applied_without_challenges():
    reply = GOOD_REPLY.replace("Challenges: yes", "Challenges: no")
    card = score_conversation(conv(), rubric(), scripted_gateway(script=[reply]))
    assert not card.challenge_flag
    assert card.scores["Graceful Handling"] == 3


def test_unparseable_retries_once_then_raises():
    gw = scripted_gateway(script=["not a scorecard", GOOD_REPLY])
    card = score_conversation(conv(), rubric(), gw)
    assert card.scores["Task Success"] == 5
    assert len(gw.provider.requests) == 2

    gw = scripted_gateway(script=["nope", "still nope"])
    with pytest.raises(JudgeParseError):
        score_conversation(conv(), rubric(), gw)


def test_scorecard_invariants():
    scores = dict.fromkeys(CRITERIA, 4)
    with pytest.raises(ValueError):
        Scorecard(0, "x", "j", dict(scores, **{"Task Success": 6}), "", True)
    with pytest.raises(ValueError):
        Scorecard(0, "x", "j", scores, "", False)  # Graceful 4 with no challenges
    card = Scorecard(0, "x", "j", dict(scores, **{"Graceful Handling": 3}), "", False)
    assert card.scores["Graceful Handling"] == 3
    with pytest.raises(ValueError):
        Scorecard(0, "x", "j", {k: 4 for k in CRITERIA[:-1]}, "", True)


def cards_with_task_success(values, condition="a"):
    return [
        Scorecard(i, condition, "j",
                  dict.fromkeys(CRITERIA, 3) | {"Task Success": v}, "", True)
        for i, v in enumerate(values)
    ]


def test_failure_rate_table_values():
    assert failure_rate(cards_with_task_success([2] * 11 + [5] * 189)) == pytest.approx(0.055)
    assert failure_rate(cards_with_task_success([3] * 48 + [4] * 152)) == pytest.approx(0.240)
    assert failure_rate(cards_with_task_success([1] * 34 + [5] * 166)) == pytest.approx(0.170)


def test_failure_rate_boundary_is_three():
    assert failure_rate(cards_with_task_success([3, 4])) == 0.5


def test_analyze_conversations():
    convs = [
        conv(("Do you want A?", "Yes.", "Great, done. Anything else?", "No.")),
        conv(("What size? And what color?", "Large, blue.")),
    ]
    an = analyze_conversations(convs)
    assert an.avg_turns == 3.0
    # Agent turns: two with exactly one '?', one with two '?'.
    assert an.one_question_turn_fraction == pytest.approx(2 / 3)
    assert an.avg_wall_clock_s == pytest.approx(0.01)
    assert an.avg_words > 0


def test_criterion_ratio():
    a = cards_with_task_success([4, 4])
    b = cards_with_task_success([2, 2])
    assert criterion_ratio(a, b, "Task Success") == 2.0


def test_join_dual():
    a = cards_with_task_success([4, 5])
    b = cards_with_task_success([3, 3])
    pairs = join_dual(a, b)
    assert len(pairs) == 2
    assert all(x.scenario_id == y.scenario_id for x, y in pairs)
    with pytest.raises(ValueError):
        join_dual(a, cards_with_task_success([3]))


def test_scorecard_io_roundtrip(tmp_path):
    cards = cards_with_task_success([1, 3, 5])
    path = tmp_path / "cards.jsonl"
    write_scorecards(path, cards)
    assert read_scorecards(path) == cards
