"""Command-line pipeline driver.

One JSON config describes a domain (graph, schema, providers, rubric, prices,
output directory); subcommands run individual stages or the full `recompile`
cycle. Exit codes: 0 ok, 2 config error, 3 provider failure, 4 validation
failure. Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from dataclasses import dataclass, field

from . import convgen, judge, stats
from .costmodel import (
    CostRow,
    TokenVolume,
    conversation_cost,
    cost_report_csv,
    load_price_sheet,
    per_token_ratio,
    self_host_rates,
)
from .errors import (
    AuthError,
    FlowCompileError,
    GraphReferenceError,
    GraphSyntaxError,
    MalformedResponse,
    StructureError,
    TransportError,
)
from .flowgraph import Violation, parse_procedure, validate
from .llmgate import Gateway, provider_config_from_dict
from .orchestrator import run_orchestrated
from .pathkit import enumerate_acyclic_paths, export_paths, path_stats
from .runtime import (
    CONDITIONS,
    DEFAULT_END_MARKER,
    IN_CONTEXT,
    SUBTERRANEAN,
    SURFACE_ORCHESTRATOR,
    UserSimConfig,
    read_conversations,
    run_compiled,
    run_in_context,
    store_filename,
    write_conversations,
)
from .scenario import extract_placeholders, load_schema, sample_scenarios

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")

DEFAULT_PERSONA = (
    "You are a customer contacting a service agent. "
    "Personality: {{personality}}."
)
DEFAULT_MINIMAL_PROMPT = "You are a helpful customer-service agent."

# Fine-tuning presets mirrored by the trainer package; the dry-run trainer
# stage emits one of these as a manifest without touching a GPU.
TRAINER_PRESETS = {
    "travel-3b": {
        "base_model": "llama-3.2-3b-instruct",
        "learning_rate": 2e-5,
        "schedule": "cosine",
        "effective_batch_size": 16,
        "epochs": 20,
    },
    "zoom-8b": {
        "base_model": "llama-3.1-8b-instruct",
        "learning_rate": 2e-5,
        "schedule": "cosine",
        "effective_batch_size": 32,
        "epochs": 10,
    },
    "insurance-8b": {
        "base_model": "llama-3.1-8b-instruct",
        "learning_rate": 2e-5,
        "schedule": "cosine",
        "effective_batch_size": 32,
        "epochs": 20,
    },
}


class ConfigError(FlowCompileError):
    pass


_ENV_REF = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interp_env(value):
    """Replace ${VAR} in every string of a JSON-ish structure."""
    if isinstance(value, str):
        def sub(m):
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name!r} is not set")
            return os.environ[name]
        return _ENV_REF.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interp_env(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interp_env(v) for v in value]
    return value


def _resolve_path(value: str, base_dir: str) -> str:
    """Resolve a config path; `builtin:name` points at the bundled fixtures."""
    if value.startswith("builtin:"):
        return os.path.join(FIXTURE_DIR, value[len("builtin:"):])
    if os.path.isabs(value):
        return value
    return os.path.normpath(os.path.join(base_dir, value))


@dataclass
class PipelineConfig:
    domain: str
    graph_path: str
    schema_path: str
    rubric_path: str
    prices_path: str
    out_dir: str
    providers: dict  # role -> ProviderConfig (roles: generator, agent, user_sim, router, judge)
    n: int = 20
    seed: int = 0
    split_fraction: float = 0.9
    turn_cap: int = 60
    max_visits_per_node: int = 2
    end_marker: str = DEFAULT_END_MARKER
    minimal_system_prompt: str = DEFAULT_MINIMAL_PROMPT
    persona_template: str = DEFAULT_PERSONA
    trainer_preset: str = "travel-3b"
    comparisons: list = field(default_factory=lambda: [
        [SUBTERRANEAN, IN_CONTEXT],
        [SUBTERRANEAN, SURFACE_ORCHESTRATOR],
    ])


_ROLES = ("generator", "agent", "user_sim", "router", "judge")


def load_config(path: str, seed=None, n=None, out=None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    doc = _interp_env(doc)
    base = os.path.dirname(os.path.abspath(path))
    try:
        providers = {
            role: provider_config_from_dict(doc["providers"][role]) for role in _ROLES
        }
        cfg = PipelineConfig(
            domain=doc["domain"],
            graph_path=_resolve_path(doc["graph"], base),
            schema_path=_resolve_path(doc["schema"], base),
            rubric_path=_resolve_path(doc["rubric"], base),
            prices_path=_resolve_path(doc["prices"], base),
            out_dir=_resolve_path(doc["out_dir"], base),
            providers=providers,
            n=doc.get("n", 20),
            seed=doc.get("seed", 0),
            split_fraction=doc.get("split_fraction", 0.9),
            turn_cap=doc.get("turn_cap", 60),
            max_visits_per_node=doc.get("max_visits_per_node", 2),
            end_marker=doc.get("end_marker", DEFAULT_END_MARKER),
            minimal_system_prompt=doc.get("minimal_system_prompt", DEFAULT_MINIMAL_PROMPT),
            persona_template=doc.get("persona_template", DEFAULT_PERSONA),
            trainer_preset=doc.get("trainer_preset", "travel-3b"),
            comparisons=doc.get("comparisons") or PipelineConfig.__dataclass_fields__[
                "comparisons"].default_factory(),
        )
    except KeyError as exc:
        raise ConfigError(f"config is missing key {exc}") from exc
    if seed is not None:
        cfg.seed = seed
    if n is not None:
        cfg.n = n
    if out is not None:
        cfg.out_dir = out
    for p in (cfg.graph_path, cfg.schema_path, cfg.rubric_path, cfg.prices_path):
        if not os.path.exists(p):
            raise ConfigError(f"referenced file does not exist: {p}")
    if cfg.trainer_preset not in TRAINER_PRESETS:
        raise ConfigError(f"unknown trainer preset {cfg.trainer_preset!r}")
    return cfg


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_graph(cfg: PipelineConfig):
    return parse_procedure(_read(cfg.graph_path))


def _gateway(cfg: PipelineConfig, role: str) -> Gateway:
    return Gateway(cfg.providers[role])


def _user_sim(cfg: PipelineConfig) -> UserSimConfig:
    return UserSimConfig(gateway=_gateway(cfg, "user_sim"),
                         persona_template=cfg.persona_template)


def _require_scripted(cfg: PipelineConfig):
    live = [role for role in _ROLES if cfg.providers[role].kind != "scripted"]
    if live:
        raise ConfigError(f"--dry-run requires scripted providers; live: {live}")


# --- stage implementations ---

def cmd_validate(cfg: PipelineConfig) -> dict:
    graph = _load_graph(cfg)  # parse_procedure raises on structural violations
    violations = validate(graph)
    schema = load_schema(_read(cfg.schema_path))
    unbound = set()
    for node in graph.nodes.values():
        unbound |= extract_placeholders(node.prompt_template) - schema.names()
    all_violations = list(violations) + [
        Violation("UNBOUND_PLACEHOLDER", name, f"placeholder {name!r} not in schema")
        for name in sorted(unbound)
    ]
    if all_violations:
        raise StructureError(all_violations)
    return {"ok": True, "nodes": len(graph.nodes), "edges": len(graph.edges),
            "decision_hubs": len(graph.decision_hubs()),
            "terminals": len(graph.terminals())}


def cmd_enumerate(cfg: PipelineConfig, out: str | None) -> dict:
    graph = _load_graph(cfg)
    paths = enumerate_acyclic_paths(graph)
    st = path_stats(paths)
    if out:
        os.makedirs(os.path.dirname(out), exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(export_paths(paths))
    print(f"path_count={st.path_count} min_turns={st.min_turns} max_turns={st.max_turns}")
    return {"path_count": st.path_count, "min_turns": st.min_turns,
            "max_turns": st.max_turns}


def _gen_paths(cfg: PipelineConfig):
    out = cfg.out_dir
    return {
        "train": os.path.join(out, "generated.train.jsonl"),
        "eval": os.path.join(out, "generated.eval.jsonl"),
        "manifest": os.path.join(out, "generation.json"),
    }


def cmd_gen_data(cfg: PipelineConfig) -> dict:
    graph = _load_graph(cfg)
    schema = load_schema(_read(cfg.schema_path))
    job = convgen.GenerationJob(
        graph=graph,
        schema=schema,
        n_conversations=cfg.n,
        seed=cfg.seed,
        generator=_gateway(cfg, "generator"),
        max_visits_per_node=cfg.max_visits_per_node,
        split_fraction=cfg.split_fraction,
        end_marker=cfg.end_marker,
    )
    convs = convgen.run_generation(job)
    dataset = convgen.build_dataset(convs, cfg.split_fraction, cfg.seed,
                                    graph=graph, schema=schema)
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = _gen_paths(cfg)
    write_conversations(paths["train"], dataset.train)
    write_conversations(paths["eval"], dataset.eval)
    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        json.dump(dataset.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"train": len(dataset.train), "eval": len(dataset.eval)}


def _load_generated(cfg: PipelineConfig) -> convgen.Dataset:
    paths = _gen_paths(cfg)
    for p in paths.values():
        if not os.path.exists(p):
            raise ConfigError(f"missing generated artifact {p}; run gen-data first")
    with open(paths["manifest"], encoding="utf-8") as fh:
        manifest = json.load(fh)
    return convgen.Dataset(
        train=read_conversations(paths["train"]),
        eval=read_conversations(paths["eval"]),
        manifest=manifest,
    )


def cmd_export(cfg: PipelineConfig) -> dict:
    dataset = _load_generated(cfg)
    out = os.path.join(cfg.out_dir, "dataset")
    manifest = convgen.export_finetune(dataset, cfg.minimal_system_prompt, out)
    return {"out": out, "train_sha256": manifest["train_sha256"],
            "eval_sha256": manifest["eval_sha256"]}


def cmd_run(cfg: PipelineConfig, condition: str | None) -> dict:
    graph = _load_graph(cfg)
    schema = load_schema(_read(cfg.schema_path))
    scenarios = sample_scenarios(schema, cfg.n, cfg.seed)
    user_sim = _user_sim(cfg)
    agent = _gateway(cfg, "agent")
    router = _gateway(cfg, "router")
    conditions = [condition] if condition else list(CONDITIONS)
    counts = {}
    os.makedirs(cfg.out_dir, exist_ok=True)
    for cond in conditions:
        convs = []
        for spec in scenarios:
            if cond == SURFACE_ORCHESTRATOR:
                convs.append(run_orchestrated(graph, spec, agent, router, user_sim,
                                              turn_cap=cfg.turn_cap))
            elif cond == IN_CONTEXT:
                convs.append(run_in_context(graph, spec, agent, user_sim,
                                            end_marker=cfg.end_marker,
                                            turn_cap=cfg.turn_cap))
            elif cond == SUBTERRANEAN:
                convs.append(run_compiled(agent, spec, user_sim,
                                          cfg.minimal_system_prompt,
                                          end_marker=cfg.end_marker,
                                          turn_cap=cfg.turn_cap))
            else:
                raise ConfigError(f"unknown condition {cond!r}")
        path = os.path.join(cfg.out_dir, store_filename(cfg.domain, cond, cfg.seed))
        write_conversations(path, convs)
        counts[cond] = len(convs)
    return counts


def _score_path(cfg: PipelineConfig, condition: str) -> str:
    return os.path.join(cfg.out_dir, f"{cfg.domain}.{condition}.{cfg.seed}.scores.jsonl")


def cmd_judge(cfg: PipelineConfig, condition: str | None) -> dict:
    rubric = judge.load_rubric(_read(cfg.rubric_path))
    gateway = _gateway(cfg, "judge")
    conditions = [condition] if condition else list(CONDITIONS)
    counts = {}
    for cond in conditions:
        store = os.path.join(cfg.out_dir, store_filename(cfg.domain, cond, cfg.seed))
        if not os.path.exists(store):
            continue
        convs = read_conversations(store)
        cards = [judge.score_conversation(c, rubric, gateway) for c in convs]
        judge.write_scorecards(_score_path(cfg, cond), cards)
        counts[cond] = len(cards)
    if not counts:
        raise ConfigError("no conversation stores found; run `run` first")
    return counts


def cmd_stats(cfg: PipelineConfig) -> dict:
    results = {}
    for cond_a, cond_b in cfg.comparisons:
        path_a, path_b = _score_path(cfg, cond_a), _score_path(cfg, cond_b)
        if not (os.path.exists(path_a) and os.path.exists(path_b)):
            continue
        cards_a = judge.read_scorecards(path_a)
        cards_b = judge.read_scorecards(path_b)
        paired = ({c.scenario_id for c in cards_a} == {c.scenario_id for c in cards_b})
        rows = stats.compare_conditions(cards_a, cards_b, paired=paired, seed=cfg.seed)
        tag = f"{cond_a}_vs_{cond_b}"
        with open(os.path.join(cfg.out_dir, f"stats.{tag}.csv"), "w", encoding="utf-8") as fh:
            fh.write(stats.results_to_csv(rows))
        with open(os.path.join(cfg.out_dir, f"stats.{tag}.json"), "w", encoding="utf-8") as fh:
            fh.write(stats.results_to_json(rows))
        results[tag] = len(rows)
    if not results:
        raise ConfigError("no scorecard pairs found; run `judge` first")
    return results


def cmd_cost(cfg: PipelineConfig) -> dict:
    sheet = load_price_sheet(_read(cfg.prices_path))
    self_in, self_out = self_host_rates(sheet)
    rows = []
    usd = {}
    for cond in CONDITIONS:
        store = os.path.join(cfg.out_dir, store_filename(cfg.domain, cond, cfg.seed))
        if not os.path.exists(store):
            continue
        convs = read_conversations(store)
        vol = TokenVolume(
            input_tokens=sum(t.input_tokens for c in convs for t in c.turns),
            output_tokens=sum(t.output_tokens for c in convs for t in c.turns),
        )
        if cond == SUBTERRANEAN:
            cost = conversation_cost(vol, self_in, self_out)
        else:
            cost = conversation_cost(vol, sheet.api_input_per_mtok, sheet.api_output_per_mtok)
        usd[cond] = (vol, cost)
    if not usd:
        raise ConfigError("no conversation stores found; run `run` first")
    base = usd.get(IN_CONTEXT, (None, 0.0))[1]
    for cond, (vol, cost) in usd.items():
        rows.append(CostRow(
            domain=cfg.domain, condition=cond,
            input_tokens=vol.input_tokens, output_tokens=vol.output_tokens,
            usd=cost, ratio_vs_in_context=(cost / base) if base else 0.0,
        ))
    csv_text = cost_report_csv(rows)
    with open(os.path.join(cfg.out_dir, "cost.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    return {"conditions": sorted(usd), "ratio_mean": per_token_ratio(sheet)["mean"]}


def _trainer_manifest(cfg: PipelineConfig) -> dict:
    dataset_dir = os.path.join(cfg.out_dir, "dataset")
    manifest_path = os.path.join(dataset_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"missing {manifest_path}; run export first")
    with open(manifest_path, encoding="utf-8") as fh:
        dataset_manifest = json.load(fh)
    preset = TRAINER_PRESETS[cfg.trainer_preset]
    manifest = {
        "preset": cfg.trainer_preset,
        "dataset": {
            "train_path": os.path.join("dataset", "train.jsonl"),
            "eval_path": os.path.join("dataset", "eval.jsonl"),
            "train_sha256": dataset_manifest["train_sha256"],
            "eval_sha256": dataset_manifest["eval_sha256"],
        },
        "base_model": preset["base_model"],
        "learning_rate": preset["learning_rate"],
        "schedule": preset["schedule"],
        "effective_batch_size": preset["effective_batch_size"],
        "epochs": preset["epochs"],
        "checkpoint_selection": "best_eval_loss",
        "precision": "bf16",
        # Documented defaults; no published values exist for these two.
        "warmup_steps": 0,
        "weight_decay": 0.0,
    }
    path = os.path.join(cfg.out_dir, "trainmanifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


SPOT_CHECK_SCENARIOS = 50


def _judge_spot_check(cfg: PipelineConfig) -> int:
    """Score up to 50 generated conversations as a post-generation gate."""
    dataset = _load_generated(cfg)
    convs = (dataset.train + dataset.eval)[:SPOT_CHECK_SCENARIOS]
    rubric = judge.load_rubric(_read(cfg.rubric_path))
    gateway = _gateway(cfg, "judge")
    cards = [judge.score_conversation(c, rubric, gateway) for c in convs]
    judge.write_scorecards(os.path.join(cfg.out_dir, "spotcheck.scores.jsonl"), cards)
    return len(cards)


def cmd_recompile(cfg: PipelineConfig, dry_run: bool) -> dict:
    if dry_run:
        _require_scripted(cfg)
    stages = (
        ("gen-data", lambda: cmd_gen_data(cfg)),
        ("export", lambda: cmd_export(cfg)),
        ("trainer-manifest", lambda: _trainer_manifest(cfg)),
        ("judge-spot-check", lambda: _judge_spot_check(cfg)),
    )
    timings = []
    for name, fn in stages:
        t0 = time.perf_counter()
        fn()
        timings.append((name, time.perf_counter() - t0))
    width = max(len(n) for n, _ in timings)
    print(f"{'stage'.ljust(width)}  seconds")
    for name, seconds in timings:
        print(f"{name.ljust(width)}  {seconds:8.3f}")
    return {"stages": [name for name, _ in timings]}


def _fmt_float(x: float) -> str:
    return f"{x:.4f}"


def cmd_report(cfg: PipelineConfig) -> dict:
    """Markdown + CSV bundle built strictly from artifacts present on disk."""
    out = cfg.out_dir
    lines = [f"# Pipeline report: {cfg.domain}", ""]
    missing = []

    gen_manifest = os.path.join(out, "generation.json")
    if os.path.exists(gen_manifest):
        with open(gen_manifest, encoding="utf-8") as fh:
            gm = json.load(fh)
        lines += ["## Generated dataset", "",
                  f"- train: {gm['counts']['train']}  eval: {gm['counts']['eval']}",
                  f"- graph_hash: `{gm['graph_hash'][:16]}…`", ""]
    else:
        missing.append("gen-data")

    any_store = False
    lines += ["## Conditions", ""]
    for cond in CONDITIONS:
        store = os.path.join(out, store_filename(cfg.domain, cond, cfg.seed))
        if not os.path.exists(store):
            continue
        any_store = True
        convs = read_conversations(store)
        an = judge.analyze_conversations(convs)
        row = (f"- {cond}: {len(convs)} conversations, "
               f"avg {an.avg_turns:.1f} turns, avg {an.avg_words:.0f} words")
        score_path = _score_path(cfg, cond)
        if os.path.exists(score_path):
            cards = judge.read_scorecards(score_path)
            row += f", failure rate {judge.failure_rate(cards):.3f}"
        lines.append(row)
    if not any_store:
        lines.append("- (none run)")
        missing.append("run")
    lines.append("")

    any_stats = False
    for cond_a, cond_b in cfg.comparisons:
        tag = f"{cond_a}_vs_{cond_b}"
        csv_path = os.path.join(out, f"stats.{tag}.csv")
        if not os.path.exists(csv_path):
            continue
        any_stats = True
        lines += [f"## Comparison: {cond_a} vs {cond_b}", "",
                  "```", _read(csv_path).rstrip(), "```", ""]
    if not any_stats:
        missing.append("stats")

    cost_path = os.path.join(out, "cost.csv")
    if os.path.exists(cost_path):
        lines += ["## Cost", "", "```", _read(cost_path).rstrip(), "```", ""]
    else:
        missing.append("cost")

    if missing:
        lines += ["## Missing stages", ""]
        lines += [f"- {name}" for name in missing]
        lines.append("")

    report_path = os.path.join(out, "report.md")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    return {"report": report_path, "missing": missing}


# --- argument parsing and dispatch ---

COMMANDS = ("validate", "enumerate", "gen-data", "export", "run", "judge",
            "stats", "cost", "report", "recompile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcompile",
        description="Compile procedure flowgraphs into datasets, run serving "
                    "conditions, and evaluate.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--condition", choices=CONDITIONS, default=None)
    parser.add_argument("--dry-run", action="store_true")
    parser.add_argument("--out", default=None)
    return parser


def _error_json(exc: Exception) -> str:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, StructureError):
        doc["violations"] = [
            {"code": v.code, "element": v.element, "message": v.message}
            for v in exc.violations
        ]
    return json.dumps(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, n=args.n, out=args.out)
        if args.dry_run and args.command != "recompile":
            _require_scripted(cfg)
        if args.command == "validate":
            result = cmd_validate(cfg)
        elif args.command == "enumerate":
            result = cmd_enumerate(cfg, args.out and os.path.join(cfg.out_dir, "paths.jsonl"))
        elif args.command == "gen-data":
            result = cmd_gen_data(cfg)
        elif args.command == "export":
            result = cmd_export(cfg)
        elif args.command == "run":
            result = cmd_run(cfg, args.condition)
        elif args.command == "judge":
            result = cmd_judge(cfg, args.condition)
        elif args.command == "stats":
            result = cmd_stats(cfg)
        elif args.command == "cost":
            result = cmd_cost(cfg)
        elif args.command == "report":
            result = cmd_report(cfg)
        else:
            result = cmd_recompile(cfg, args.dry_run)
    except ConfigError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except (TransportError, AuthError, MalformedResponse) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 3
    except (StructureError, GraphSyntaxError, GraphReferenceError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 4
    except FlowCompileError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 4
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
