import json

import pytest

from flowcompile.convgen import (
    Dataset,
    GenerationJob,
    assign_paths,
    build_dataset,
    export_finetune,
    generate_conversation,
    import_finetune,
    merge_runs,
    run_generation,
)
from flowcompile.errors import GraphMismatch
from flowcompile.flowgraph import graph_hash
from flowcompile.pathkit import enumerate_acyclic_paths
from flowcompile.runtime import DEFAULT_END_MARKER, Conversation, Turn
from flowcompile.scenario import sample_scenarios

from conftest import scripted_gateway

MINIMAL = "You are a helpful customer-service agent."


def make_convs(n, seed=0):
    """Synthetic conversations (no LLM) for bookkeeping tests."""
    return [
        Conversation(
            turns=[Turn(role="agent", content=f"m{i}")],
            condition="subterranean", scenario_id=i, seed=seed + i,
            terminal="success", wall_clock_s=0.001)
        for i in range(n)
    ]


def test_generate_conversation_follows_path(travel_graph, travel_schema):
    path = enumerate_acyclic_paths(travel_graph)[0]
    spec = sample_scenarios(travel_schema, 1, 3)[0]
    conv = generate_conversation(travel_graph, path, spec, scripted_gateway("dialogue"))
    assert len(conv.turns) == len(path.node_ids)
    assert [t.node_id for t in conv.turns] == list(path.node_ids)
    assert [t.role for t in conv.turns] == [travel_graph.nodes[n].role
                                            for n in path.node_ids]
    assert conv.terminal == path.terminal_kind
    assert conv.turns[-1].content.endswith(DEFAULT_END_MARKER)
    for t in conv.turns[:-1]:
        assert DEFAULT_END_MARKER not in t.content


def test_generated_contents_free_of_annotations(travel_graph, travel_schema):
    path = enumerate_acyclic_paths(travel_graph)[1]
    spec = sample_scenarios(travel_schema, 1, 4)[0]
    conv = generate_conversation(travel_graph, path, spec, scripted_gateway("dialogue"))
    for t in conv.turns:
        assert "{{" not in t.content
        for nid in travel_graph.nodes:
            assert nid not in t.content


def test_assign_paths_covers_acyclic_first(travel_graph):
    acyclic = enumerate_acyclic_paths(travel_graph)
    paths = assign_paths(travel_graph, 10, seed=1)
    assert paths[:len(acyclic)] == acyclic
    assert len(paths) == 10
    assert assign_paths(travel_graph, 10, seed=1) == paths


def test_run_generation_deterministic(travel_graph, travel_schema):
    def job():
        return GenerationJob(graph=travel_graph, schema=travel_schema,
                             n_conversations=8, seed=11,
                             generator=scripted_gateway("dialogue"))

    a = run_generation(job())
    b = run_generation(job())
    assert a == b
    assert len(a) == 8
    assert [c.scenario_id for c in a] == list(range(8))


def test_build_dataset_split_870():
    ds = build_dataset(make_convs(870), 0.9, seed=0)
    assert len(ds.train) == 783
    assert len(ds.eval) == 87
    assert ds.manifest["counts"] == {"train": 783, "eval": 87}
    # Shuffle is a permutation of the input.
    ids = sorted(c.scenario_id for c in ds.train + ds.eval)
    assert ids == list(range(870))


def test_build_dataset_shuffle_seeded():
    a = build_dataset(make_convs(50), 0.8, seed=1)
    b = build_dataset(make_convs(50), 0.8, seed=1)
    c = build_dataset(make_convs(50), 0.8, seed=2)
    assert [x.scenario_id for x in a.train] == [x.scenario_id for x in b.train]
    assert [x.scenario_id for x in a.train] != [x.scenario_id for x in c.train]


def test_merge_eight_runs_preserves_duplicates(travel_graph):
    runs = [build_dataset(make_convs(870, seed=r * 1000), 0.9, seed=r,
                          graph=travel_graph) for r in range(8)]
    merged = merge_runs(runs)
    assert len(merged.train) == 6264
    assert len(merged.eval) == 8 * 87
    assert merged.manifest["seeds"] == list(range(8))
    # Same scenario ids recur across runs: duplicates preserved, no dedup.
    ids = [c.scenario_id for c in merged.train]
    assert len(ids) != len(set(ids))


def test_merge_rejects_graph_mismatch(travel_graph, zoom_graph):
    a = build_dataset(make_convs(10), 0.9, seed=0, graph=travel_graph)
    b = build_dataset(make_convs(10), 0.9, seed=0, graph=zoom_graph)
    with pytest.raises(GraphMismatch):
        merge_runs([a, b])


def test_export_record_format_exact(tmp_path, travel_graph):
    conv = Conversation(
        turns=[Turn(role="agent", content="Hello!", node_id="greet_open"),
               Turn(role="user", content="Hi.", node_id="user_request")],
        condition="subterranean", scenario_id=7, seed=1234,
        terminal="success", wall_clock_s=0.0)
    ds = Dataset(train=[conv], eval=[],
                 manifest={"graph_hash": graph_hash(travel_graph), "schema_hash": "",
                           "seeds": [0], "counts": {"train": 1, "eval": 0}})
    export_finetune(ds, MINIMAL, tmp_path)
    line = (tmp_path / "train.jsonl").read_text().splitlines()[0]
    expected = json.dumps({
        "messages": [
            {"role": "system", "content": MINIMAL},
            {"role": "assistant", "content": "Hello!"},
            {"role": "user", "content": "Hi."},
        ],
        "meta": {
            "scenario_id": 7,
            "seed": 1234,
            "path": ["greet_open", "user_request"],
            "graph_hash": graph_hash(travel_graph),
        },
    }, sort_keys=True)
    assert line == expected


def test_export_manifest_hashes_and_import(tmp_path, travel_graph):
    ds = build_dataset(make_convs(20), 0.9, seed=5, graph=travel_graph)
    manifest = export_finetune(ds, MINIMAL, tmp_path)
    import hashlib
    for split in ("train", "eval"):
        digest = hashlib.sha256((tmp_path / f"{split}.jsonl").read_bytes()).hexdigest()
        assert manifest[f"{split}_sha256"] == digest
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert manifest["minimal_system_prompt"] == MINIMAL
    records = import_finetune(tmp_path)
    assert len(records) == 20
    assert all(r["messages"][0]["role"] == "system" for r in records)


def test_export_byte_stable(tmp_path, travel_graph, travel_schema):
    def produce(where):
        job = GenerationJob(graph=travel_graph, schema=travel_schema,
                            n_conversations=6, seed=2,
                            generator=scripted_gateway("dialogue"))
        ds = build_dataset(run_generation(job), 0.9, 2, graph=travel_graph,
                           schema=travel_schema)
        export_finetune(ds, MINIMAL, where)
        return (where / "train.jsonl").read_bytes(), (where / "manifest.json").read_bytes()

    a = produce(tmp_path / "a")
    b = produce(tmp_path / "b")
    assert a == b


def test_split_fraction_validation(travel_graph, travel_schema):
    with pytest.raises(ValueError):
        GenerationJob(graph=travel_graph, schema=travel_schema, n_conversations=5,
                      seed=0, generator=scripted_gateway("dialogue"),
                      split_fraction=0.0)
    with pytest.raises(ValueError):
        build_dataset([], 0.9, 0)
