import pytest

from flowcompile.errors import RoutingFailure, TemplateError
from flowcompile.orchestrator import (
    export_routing_log,
    agent_turn,
    new_session,
    route,
    run_orchestrated,
)
from flowcompile.runtime import SURFACE_ORCHESTRATOR, UserSimConfig
from flowcompile.scenario import ScenarioSpec, sample_scenarios

from conftest import scripted_gateway

PERSONA = "You are a customer. Personality: {{personality}}."


def full_spec(travel_schema, i=0, seed=5):
    return sample_scenarios(travel_schema, i + 1, seed)[i]


def sim():
    return UserSimConfig(gateway=scripted_gateway("user"), persona_template=PERSONA)


def test_agent_turn_injects_rendered_instruction(travel_graph, travel_schema):
    spec = full_spec(travel_schema)
    session = new_session(travel_graph, spec)
    gw = scripted_gateway("dialogue")
    agent_turn(session, gw)
    system = gw.provider.requests[0].messages[0].content
    assert "Greet the customer warmly" in system
    assert "{{" not in system
    assert session.history[0].node_id == "greet_open"
    assert session.current_node == "greet_open"  # does not advance


def test_agent_turn_template_error_before_llm_call(travel_graph):
    spec = ScenarioSpec(scenario_id=0, seed=0, bindings={})  # nothing bound
    session = new_session(travel_graph, spec)
    session.current_node = "gather_preferences"  # template uses {{budget}}
    gw = scripted_gateway("dialogue")
    with pytest.raises(TemplateError, match="gather_preferences"):
        agent_turn(session, gw)
    assert gw.provider.requests == []
    assert gw.ledger.entries == []


def test_route_single_edge_uses_no_llm(travel_graph, travel_schema):
    session = new_session(travel_graph, full_spec(travel_schema))
    router = scripted_gateway("router")
    assert route(session, router) == "user_request"
    assert router.provider.requests == []
    assert session.routing_log == []


def test_route_hub_prompt_and_choice(travel_graph, travel_schema):
    session = new_session(travel_graph, full_spec(travel_schema))
    session.current_node = "user_choice"  # 4-way hub
    router = scripted_gateway(script=["2"])
    nxt = route(session, router)
    prompt = router.provider.requests[0].messages[1].content
    assert "Reply with a single number between 1 and 4." in prompt
    assert "1." in prompt and "4." in prompt
    record = session.routing_log[0]
    assert record.hub == "user_choice"
    assert record.chosen == 2
    assert record.attempts == 1
    assert nxt == session.graph.outgoing("user_choice")[1].dst


def test_route_retries_unparseable_then_succeeds(travel_graph, travel_schema):
    session = new_session(travel_graph, full_spec(travel_schema))
    session.current_node = "user_choice"
    router = scripted_gateway(script=["none of these", "first option: 3"])
    route(session, router)
    record = session.routing_log[0]
    assert record.chosen == 3
    assert record.attempts == 2


def test_route_out_of_range_is_unparseable(travel_graph, travel_schema):
    session = new_session(travel_graph, full_spec(travel_schema))
    session.current_node = "user_choice"
    router = scripted_gateway(script=["9", "7"])
    with pytest.raises(RoutingFailure):
        route(session, router)
    assert session.failed
    record = session.routing_log[0]
    assert record.chosen is None
    assert record.attempts == 2


def test_run_orchestrated_reaches_terminal(travel_graph, travel_schema):
    spec = full_spec(travel_schema)
    conv = run_orchestrated(travel_graph, spec, scripted_gateway("dialogue"),
                            scripted_gateway("router"), sim())
    assert conv.condition == SURFACE_ORCHESTRATOR
    assert conv.terminal in ("success", "abandonment", "escalation", "TURN_CAP")
    # Every turn carries its node id and roles follow the graph.
    for t in conv.turns:
        assert t.node_id in travel_graph.nodes
        assert travel_graph.nodes[t.node_id].role == t.role
    assert conv.turns[0].node_id == "greet_open"
    if conv.terminal in ("success", "abandonment", "escalation"):
        last = travel_graph.nodes[conv.turns[-1].node_id]
        assert last.terminal_kind == conv.terminal


def test_run_orchestrated_routing_failure_marks_failed(travel_graph, travel_schema):
    spec = full_spec(travel_schema)
    router = scripted_gateway(script=["gibberish"] * 50)
    conv = run_orchestrated(travel_graph, spec, scripted_gateway("dialogue"),
                            router, sim())
    assert conv.terminal == "FAILED"
    assert conv.routing_log[-1].chosen is None


def test_run_orchestrated_deterministic(travel_graph, travel_schema):
    spec = full_spec(travel_schema)

    def run():
        return run_orchestrated(travel_graph, spec, scripted_gateway("dialogue"),
                                scripted_gateway("router"), sim())

    a, b = run(), run()
    assert a == b
    assert a.wall_clock_s > 0


def test_export_routing_log(travel_graph, travel_schema):
    session = new_session(travel_graph, full_spec(travel_schema))
    session.current_node = "user_choice"
    route(session, scripted_gateway(script=["1"]))
    text = export_routing_log(session.routing_log)
    assert '"hub": "user_choice"' in text
    assert text.endswith("\n")
