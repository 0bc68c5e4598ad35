"""Back half of the compiler: synthesize training conversations along sampled
paths, split/merge datasets, and export fine-tuning files."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

from .errors import DeadEnd, GraphMismatch
from .flowgraph import AGENT, ProcedureGraph, graph_hash
from .llmgate import ChatMessage, ChatRequest, Gateway
from .pathkit import Path, enumerate_acyclic_paths, sample_path
from .rng import SplitMix64, derive_seed
from .runtime import DEFAULT_END_MARKER, SUBTERRANEAN, Conversation, Turn
from .scenario import ScenarioSchema, ScenarioSpec, render_template, sample_scenarios, schema_hash

log = logging.getLogger(__name__)

GEN_SYSTEM = (
    "You are writing one turn of a natural customer-service conversation.\n"
    "Speaker for this turn: {speaker}.\n"
    "Guideline for this turn: {guideline}\n\n"
    "Write the speaker's message only, as natural dialogue. Do not mention the "
    "guideline or any internal process."
)


@dataclass
class GenerationJob:
    graph: ProcedureGraph
    schema: ScenarioSchema
    n_conversations: int
    seed: int
    generator: Gateway
    max_visits_per_node: int = 2
    split_fraction: float = 0.9
    temperature: float = 0.8
    end_marker: str = DEFAULT_END_MARKER
    max_turn_tokens: int = 400
    path_cap: int = 100_000

    def __post_init__(self):
        if self.n_conversations < 1:
            raise ValueError("n_conversations must be >= 1")
        if not (0.0 < self.split_fraction <= 1.0):
            raise ValueError("split_fraction must be in (0, 1]")


@dataclass
class Dataset:
    train: list[Conversation]
    eval: list[Conversation]
    manifest: dict = field(default_factory=dict)


def generate_conversation(graph: ProcedureGraph, path: Path, scenario: ScenarioSpec,
                          generator: Gateway, temperature: float = 0.8,
                          end_marker: str = DEFAULT_END_MARKER,
                          max_turn_tokens: int = 400) -> Conversation:
    """One LLM call per node along the path. Message contents stay free of
    node ids and placeholder syntax; node_id lives only in turn metadata.
    The terminal turn gets the end marker appended."""
    turns: list[Turn] = []
    transcript_lines: list[str] = []
    for node_id in path.node_ids:
        node = graph.nodes[node_id]
        speaker = "the agent" if node.role == AGENT else "the customer"
        guideline = render_template(node.prompt_template, scenario)
        system = GEN_SYSTEM.format(speaker=speaker, guideline=guideline)
        messages = [ChatMessage("system", system)]
        if transcript_lines:
            messages.append(ChatMessage("user", "Conversation so far:\n" + "\n".join(transcript_lines)))
        else:
            messages.append(ChatMessage("user", "The conversation is just starting."))
        response = generator.complete(ChatRequest(
            messages=tuple(messages),
            temperature=temperature,
            max_output_tokens=max_turn_tokens,
            tag="gen",
        ))
        content = response.content
        if node.is_terminal:
            content = content + " " + end_marker
        turns.append(Turn(
            role=node.role,
            content=content,
            node_id=node.id,
            input_tokens=response.input_tokens,
            output_tokens=response.output_tokens,
            latency_ms=response.latency_ms,
        ))
        label = "Agent" if node.role == AGENT else "User"
        transcript_lines.append(f"{label}: {response.content}")
    return Conversation(
        turns=turns,
        condition=SUBTERRANEAN,
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        terminal=path.terminal_kind,
        wall_clock_s=sum(t.latency_ms for t in turns) / 1000.0,
    )


def assign_paths(graph: ProcedureGraph, n: int, seed: int,
                 max_visits_per_node: int = 2, path_cap: int = 100_000) -> list[Path]:
    """Round-robin over enumerated acyclic paths first (coverage), then seeded
    sampling with loops allowed for the remainder."""
    acyclic = enumerate_acyclic_paths(graph, cap=path_cap)
    paths: list[Path] = []
    for i in range(min(n, len(acyclic))):
        paths.append(acyclic[i % len(acyclic)])
    for i in range(len(paths), n):
        # A walk can exhaust its visit budget mid-loop; resample with a
        # salted seed. 64 tries is far past anything seen in practice.
        for salt in range(64):
            try:
                paths.append(sample_path(graph, derive_seed(seed, 1, i, salt),
                                         max_visits_per_node))
                break
            except DeadEnd:
                if salt == 63:
                    raise
    return paths


def run_generation(job: GenerationJob) -> list[Conversation]:
    """Generate the job's conversations in scenario_id order, retrying failed
    generations with fresh derived seeds up to 3 times."""
    scenarios = sample_scenarios(job.schema, job.n_conversations, job.seed)
    paths = assign_paths(job.graph, job.n_conversations, job.seed,
                         job.max_visits_per_node, job.path_cap)
    convs: list[Conversation] = []
    losses = 0
    for scenario, path in zip(scenarios, paths):
        conv = None
        for retry in range(4):
            try:
                conv = generate_conversation(job.graph, path, scenario, job.generator,
                                             temperature=job.temperature,
                                             end_marker=job.end_marker,
                                             max_turn_tokens=job.max_turn_tokens)
                break
            except Exception as exc:  # noqa: BLE001 - logged, regenerated
                log.warning("generation failed (scenario %d, node path %s, retry %d): %s",
                            scenario.scenario_id, "->".join(path.node_ids), retry, exc)
                if retry == 3:
                    losses += 1
        if conv is not None:
            convs.append(conv)
    if losses:
        log.warning("%d conversations lost after retries", losses)
    return convs


def build_dataset(convs: list[Conversation], split_fraction: float, seed: int,
                  graph: ProcedureGraph | None = None,
                  schema: ScenarioSchema | None = None) -> Dataset:
    """Deterministic seeded shuffle, then round(n * fraction) train records."""
    if not convs:
        raise ValueError("convs must be nonempty")
    order = list(range(len(convs)))
    SplitMix64(derive_seed(seed, 2)).shuffle(order)
    n_train = round(len(convs) * split_fraction)
    train = [convs[i] for i in order[:n_train]]
    eval_ = [convs[i] for i in order[n_train:]]
    manifest = {
        "graph_hash": graph_hash(graph) if graph else "",
        "schema_hash": schema_hash(schema) if schema else "",
        "seeds": [seed],
        "counts": {"train": len(train), "eval": len(eval_)},
        "generation_losses": 0,
    }
    return Dataset(train=train, eval=eval_, manifest=manifest)


def merge_runs(datasets: list[Dataset]) -> Dataset:
    """Concatenate runs in order with no deduplication."""
    if not datasets:
        raise ValueError("datasets must be nonempty")
    hashes = {d.manifest.get("graph_hash") for d in datasets}
    if len(hashes) != 1:
        raise GraphMismatch(f"datasets built from different graphs: {sorted(hashes)}")
    train: list[Conversation] = []
    eval_: list[Conversation] = []
    seeds: list[int] = []
    for d in datasets:
        train.extend(d.train)
        eval_.extend(d.eval)
        seeds.extend(d.manifest.get("seeds", []))
    manifest = dict(datasets[0].manifest)
    manifest["seeds"] = seeds
    manifest["counts"] = {"train": len(train), "eval": len(eval_)}
    return Dataset(train=train, eval=eval_, manifest=manifest)


def _record(conv: Conversation, minimal_system_prompt: str, graph_hash_hex: str) -> dict:
    messages = [{"role": "system", "content": minimal_system_prompt}]
    for t in conv.turns:
        messages.append({
            "role": "assistant" if t.role == AGENT else "user",
            "content": t.content,
        })
    return {
        "messages": messages,
        "meta": {
            "scenario_id": conv.scenario_id,
            "seed": conv.seed,
            "path": [t.node_id for t in conv.turns],
            "graph_hash": graph_hash_hex,
        },
    }


def export_finetune(dataset: Dataset, minimal_system_prompt: str, out_dir) -> dict:
    """Write train.jsonl / eval.jsonl plus manifest.json; returns the manifest
    (now carrying file hashes) for downstream trainer verification."""
    import os

    if not dataset.train and not dataset.eval:
        raise ValueError("dataset is empty")
    os.makedirs(out_dir, exist_ok=True)
    ghash = dataset.manifest.get("graph_hash", "")
    paths = {}
    for split, convs in (("train", dataset.train), ("eval", dataset.eval)):
        path = os.path.join(out_dir, f"{split}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for conv in convs:
                fh.write(json.dumps(_record(conv, minimal_system_prompt, ghash),
                                    sort_keys=True) + "\n")
        paths[split] = path
    manifest = dict(dataset.manifest)
    manifest["minimal_system_prompt"] = minimal_system_prompt
    for split, path in paths.items():
        with open(path, "rb") as fh:
            manifest[f"{split}_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def import_finetune(out_dir) -> list[dict]:
    """Read back exported records (train then eval) for round-trip checks."""
    import os

    records = []
    for split in ("train", "eval"):
        path = os.path.join(out_dir, f"{split}.jsonl")
        if not os.path.exists(path):
            continue
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
    return records
