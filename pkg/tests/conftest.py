import json
import os

import pytest

from flowcompile.flowgraph import ProcedureGraph, parse_procedure
from flowcompile.llmgate import Gateway, ProviderConfig
from flowcompile.scenario import load_schema

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "src", "flowcompile", "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def fixture_text(name: str) -> str:
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as fh:
        return fh.read()


def golden_path(name: str) -> str:
    return os.path.join(GOLDEN, name)


@pytest.fixture(scope="session")
def travel_graph() -> ProcedureGraph:
    return parse_procedure(fixture_text("travel.flow.json"))


@pytest.fixture(scope="session")
def zoom_graph() -> ProcedureGraph:
    return parse_procedure(fixture_text("zoom.flow.json"))


@pytest.fixture(scope="session")
def insurance_graph() -> ProcedureGraph:
    return parse_procedure(fixture_text("insurance.flow.json"))


@pytest.fixture(scope="session")
def travel_schema():
    return load_schema(fixture_text("travel.schema.json"))


def scripted_gateway(profile: str = "", script=()) -> Gateway:
    return Gateway(ProviderConfig(kind="scripted", script_profile=profile,
                                  script=tuple(script)))


def write_pipeline_config(path, out_dir, domain: str = "travel", **overrides) -> str:
    """Write a fully scripted pipeline config; returns its path."""
    doc = {
        "domain": domain,
        "graph": f"builtin:{domain}.flow.json",
        "schema": f"builtin:{domain}.schema.json",
        "rubric": "builtin:rubric.json",
        "prices": "builtin:prices.json",
        "out_dir": str(out_dir),
        "n": 12,
        "seed": 42,
        "providers": {
            "generator": {"kind": "scripted", "script_profile": "dialogue"},
            "agent": {"kind": "scripted", "script_profile": "agent-close-4"},
            "user_sim": {"kind": "scripted", "script_profile": "user"},
            "router": {"kind": "scripted", "script_profile": "router"},
            "judge": {"kind": "scripted", "script_profile": "judge"},
        },
    }
    doc.update(overrides)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    return str(path)
