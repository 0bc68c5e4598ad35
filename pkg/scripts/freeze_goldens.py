"""Regenerate the frozen golden files under tests/golden/.

Run from the repo root after an intentional behavior change:
    python scripts/freeze_goldens.py
Then review the diff before committing.
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from flowcompile.flowgraph import parse_procedure  # noqa: E402
from flowcompile.judge import Scorecard  # noqa: E402
from flowcompile.llmgate import Gateway, ProviderConfig  # noqa: E402
from flowcompile.runtime import UserSimConfig, conversation_to_dict, run_in_context  # noqa: E402
from flowcompile.scenario import export_scenarios, load_schema, sample_scenarios  # noqa: E402
from flowcompile.stats import bootstrap_ci_mean, compare_conditions, results_to_csv  # noqa: E402

ROOT = os.path.join(os.path.dirname(__file__), "..")
FIXTURES = os.path.join(ROOT, "src", "flowcompile", "fixtures")
GOLDEN = os.path.join(ROOT, "tests", "golden")

PERSONA = "You are a customer. Personality: {{personality}}."


def read(name):
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as fh:
        return fh.read()


def write(name, text):
    path = os.path.join(GOLDEN, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {path}")


def scripted(profile):
    return Gateway(ProviderConfig(kind="scripted", script_profile=profile))


def freeze_scenarios():
    schema = load_schema(read("travel.schema.json"))
    write("scenarios.travel.n200.s42.jsonl",
          export_scenarios(sample_scenarios(schema, 200, 42)))


def freeze_transcripts():
    graph = parse_procedure(read("travel.flow.json"))
    schema = load_schema(read("travel.schema.json"))
    agent = scripted("agent-close-4")
    user = UserSimConfig(gateway=scripted("user"), persona_template=PERSONA)
    convs = [run_in_context(graph, s, agent, user)
             for s in sample_scenarios(schema, 10, 7)]
    write("transcripts.travel.s7.jsonl",
          "".join(json.dumps(conversation_to_dict(c), sort_keys=True) + "\n"
                  for c in convs))


def freeze_bootstrap():
    cases = []
    for sample, resamples, seed in (
        ([1.0, 2.0, 3.0, 4.0, 10.0], 2000, 5),
        ([float(x) for x in range(1, 21)], 5000, 1),
        ([3.0, 3.0, 4.0, 5.0, 5.0, 2.0], 10_000, 0),
    ):
        lo, hi = bootstrap_ci_mean(sample, resamples, seed)
        cases.append({"sample": sample, "resamples": resamples, "seed": seed,
                      "ci": [lo, hi]})
    write("bootstrap_ci.json", json.dumps(cases, indent=2) + "\n")


def make_cards(condition, offset=0, n=12):
    # Mirrors tests/test_stats.py::make_cards.
    cards = []
    for i in range(n):
        base = 2 + ((i + offset) % 3)
        scores = {
            "Task Success": min(5, base + offset),
            "Information Accuracy": base,
            "Consistency": min(5, base + 1),
            "Graceful Handling": 3,
            "Naturalness": max(1, base - 1),
        }
        cards.append(Scorecard(i, condition, "j", scores, "", True))
    return cards


def freeze_comparison():
    results = compare_conditions(make_cards("x", offset=1), make_cards("y", offset=0),
                                 paired=True, seed=42, resamples=1000)
    write("comparison.csv", results_to_csv(results))


def main():
    os.makedirs(GOLDEN, exist_ok=True)
    freeze_scenarios()
    freeze_transcripts()
    freeze_bootstrap()
    freeze_comparison()


if __name__ == "__main__":
    main()
