"""Command-line entry point: one binary over the whole pipeline.

Subcommands: kg stats/subgraph, plans extract, dataset build, plan,
retrieve, answer, eval, ablate, profile, synth. Option precedence is
flags > config file (--config, JSON) > environment (KGREASON_<NAME>) >
built-in defaults, and the effective config is echoed into every output's
header. Randomized behavior always requires an explicit --seed.

Exit codes: 0 ok, 1 usage, 2 data error, 3 transport error. Outputs are
written to `<name>.partial` and renamed on success, so a crash leaves the
partial file behind instead of a corrupt final one.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from .client import ChatClient, ClientConfig
from .dataset import (
    build_planning_instances,
    build_reasoning_instances,
    dataset_stats,
)
from .errors import DataError, KgreasonError, TransportError
from .evaluate import (
    ABLATION_LABELS,
    ABLATION_MODES,
    MetricReport,
    profile_retrieval,
    run_ablations,
    score,
)
from .paths import (
    DEFAULT_MAX_PATHS,
    load_path_records,
    path_record,
    retrieve_reasoning_paths,
    shortest_relation_paths,
)
from .planning import (
    FilePlanner,
    LLMPlanner,
    OraclePlanner,
    PlanSet,
    load_plan_sets,
    load_qa_instances,
    resolve_entity_labels,
    save_qa_instances,
)
from .reasoning import (
    MODE_LLM,
    MODE_RAW,
    MODE_VOTE,
    AnswerSet,
    format_label_paths,
    llm_reason_block,
    load_answer_sets,
    vote_label_paths,
)
from .store import extract_subgraph, load_graph, save_graph
from .synth import (
    BenchmarkConfig,
    closed_loop_questions,
    random_graph,
    random_walk_questions,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3

ENV_PREFIX = "KGREASON_"


class Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- option resolution -------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return cfg


def _resolve(args, name: str, cfg: dict, default, cast=None):
    """flags > config file > environment > defaults."""
    value = getattr(args, name, None)
    source = cfg.get(name)
    if value is None and source is not None:
        value = source
    if value is None:
        env_value = os.environ.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            value = env_value
    if value is None:
        return default
    return cast(value) if cast is not None else value


@contextmanager
def staged_output(path: str | Path):
    """Write to <path>.partial, rename to <path> on clean exit."""
    final = Path(path)
    final.parent.mkdir(parents=True, exist_ok=True)
    partial = final.with_name(final.name + ".partial")
    fh = open(partial, "w", encoding="utf-8")
    try:
        yield fh
    except BaseException:
        fh.close()
        raise
    fh.close()
    partial.replace(final)


def _with_ext(prefix: str | Path, ext: str) -> Path:
    return Path(str(prefix) + ext)


def _jsonl_header(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True) + "\n"


def _text_header(config: dict) -> str:
    return "".join(f"# {k} = {config[k]}\n" for k in sorted(config))


# -- llm client plumbing ------------------------------------------------------

def _add_llm_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("llm endpoint")
    group.add_argument("--base-url", help="chat-completions endpoint base URL")
    group.add_argument("--model", help="model id sent with each request")
    group.add_argument("--api-key-env", help="environment variable holding the API key")
    group.add_argument("--timeout", type=float, help="per-request timeout seconds")
    group.add_argument("--max-retries", type=int, help="retries on transient failures")
    group.add_argument("--temperature", type=float)
    group.add_argument("--max-tokens", type=int)
    group.add_argument("--candidates", type=int, help="candidates requested per call")
    group.add_argument("--max-in-flight", type=int)
    group.add_argument("--cache-dir", help="on-disk response cache directory")


def _build_client(args, cfg: dict) -> tuple[ChatClient | None, dict]:
    llm_cfg = cfg.get("llm", {}) if isinstance(cfg.get("llm"), dict) else {}
    merged = dict(cfg)
    merged.update(llm_cfg)
    base_url = _resolve(args, "base_url", merged, None)
    settings = {
        "base_url": base_url,
        "model": _resolve(args, "model", merged, "default-model"),
        "api_key_env": _resolve(args, "api_key_env", merged, "KGREASON_API_KEY"),
        "timeout": _resolve(args, "timeout", merged, 30.0, float),
        "max_retries": _resolve(args, "max_retries", merged, 3, int),
        "temperature": _resolve(args, "temperature", merged, 0.0, float),
        "max_tokens": _resolve(args, "max_tokens", merged, 512, int),
        "candidates": _resolve(args, "candidates", merged, 1, int),
        "max_in_flight": _resolve(args, "max_in_flight", merged, 4, int),
        "cache_dir": _resolve(args, "cache_dir", merged, None),
    }
    if not base_url:
        return None, settings
    client = ChatClient(ClientConfig(
        base_url=settings["base_url"],
        model_id=settings["model"],
        api_key_env=settings["api_key_env"],
        timeout=settings["timeout"],
        max_retries=settings["max_retries"],
        temperature=settings["temperature"],
        max_tokens=settings["max_tokens"],
        candidate_count=settings["candidates"],
        max_in_flight=settings["max_in_flight"],
        cache_dir=settings["cache_dir"],
    ))
    return client, settings


def _default_parallelism(llm_stage: bool) -> int:
    return 4 if llm_stage else (os.cpu_count() or 1)


# -- subcommand implementations ----------------------------------------------

def cmd_kg_stats(args) -> int:
    graph = load_graph(args.graph, add_inverse=args.add_inverse)
    stats = graph.stats()
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        width = max(len(k) for k in stats)
        for key, value in stats.items():
            print(f"{key:<{width}}  {value}")
    return EXIT_OK


def cmd_kg_subgraph(args) -> int:
    graph = load_graph(args.graph, add_inverse=args.add_inverse)
    seeds = set()
    for label in args.seeds.split(","):
        label = label.strip()
        if label:
            seeds.add(graph.entities.id_of(label))
    sub = extract_subgraph(graph, seeds, args.max_hops)
    save_graph(sub, args.out)
    print(f"wrote {sub.n_triples} triples to {args.out}")
    return EXIT_OK


def cmd_plans_extract(args) -> int:
    cfg = _load_config_file(args.config)
    max_len = _resolve(args, "max_len", cfg, 4, int)
    graph = load_graph(args.graph)
    qa_split = load_qa_instances(args.qa)
    config = {"command": "plans extract", "graph": str(args.graph),
              "qa": str(args.qa), "max_len": max_len}

    extracted = skipped = unreachable = truncated = 0
    with staged_output(args.out) as fh:
        fh.write(_jsonl_header(config))
        for qa in qa_split:
            q_ids = resolve_entity_labels(graph, qa.question_entities)
            a_ids = resolve_entity_labels(graph, qa.answer_entities)
            if not q_ids or not a_ids:
                skipped += 1
                continue
            found = shortest_relation_paths(graph, q_ids, a_ids, max_len)
            if found.truncated:
                truncated += 1
            if not found.plans:
                unreachable += 1
            else:
                extracted += 1
            plans = sorted(found.plans, key=lambda p: (len(p), p.relations))
            fh.write(json.dumps({
                "question_id": qa.id,
                "plans": [list(p.relations) for p in plans],
                "distance": found.distance,
            }, ensure_ascii=False) + "\n")
    print(f"extracted={extracted} unreachable={unreachable} "
          f"skipped_unresolvable={skipped} truncated={truncated}")
    return EXIT_OK


def cmd_dataset_build(args) -> int:
    cfg = _load_config_file(args.config)
    max_len = _resolve(args, "max_len", cfg, 4, int)
    plan_cap = _resolve(args, "plan_cap", cfg, 10, int)
    graph = load_graph(args.graph)
    qa_split = load_qa_instances(args.qa)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {"command": "dataset build", "graph": str(args.graph),
              "qa": str(args.qa), "kind": args.kind,
              "max_len": max_len, "plan_cap": plan_cap}

    all_records = []
    reports = {}
    if args.kind in ("planning", "both"):
        records, build_report = build_planning_instances(
            qa_split, graph, max_len=max_len, plan_cap=plan_cap)
        with staged_output(out_dir / "planning.jsonl") as fh:
            fh.write(_jsonl_header(config))
            for record in records:
                fh.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")
        all_records.extend(records)
        reports["planning"] = build_report.to_dict()
    if args.kind in ("reasoning", "both"):
        records, build_report = build_reasoning_instances(
            qa_split, graph, max_len=max_len, plan_cap=plan_cap)
        with staged_output(out_dir / "reasoning.jsonl") as fh:
            fh.write(_jsonl_header(config))
            for record in records:
                fh.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")
        all_records.extend(records)
        reports["reasoning"] = build_report.to_dict()

    stats = dataset_stats(all_records)
    with staged_output(out_dir / "stats.txt") as fh:
        fh.write(_text_header(config))
        fh.write(stats.to_text() + "\n")
    with staged_output(out_dir / "stats.json") as fh:
        payload = {"config": config, "stats": stats.to_dict(), "build": reports}
        fh.write(json.dumps(payload, indent=2) + "\n")
    print(stats.to_text())
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_config_file(args.config)
    top_k = _resolve(args, "top_k", cfg, 3, int)
    max_len = _resolve(args, "max_len", cfg, 4, int)
    qa_split = load_qa_instances(args.qa)

    graph = load_graph(args.graph) if args.graph else None
    client = None
    if args.backend == "oracle":
        if graph is None:
            raise DataError("oracle backend needs --graph")
        planner = OraclePlanner(graph, max_len=max_len)
    elif args.backend == "file":
        if not args.plans_file:
            raise DataError("file backend needs --plans-file")
        planner = FilePlanner.from_jsonl(args.plans_file)
    else:
        client, settings = _build_client(args, cfg)
        if client is None:
            raise DataError("llm backend needs --base-url (or config/env)")
        planner = LLMPlanner(client, vocab=graph.relations if graph else None)

    config = {"command": "plan", "backend": args.backend, "qa": str(args.qa),
              "top_k": top_k, "max_len": max_len,
              "graph": str(args.graph) if args.graph else None}
    with staged_output(args.out) as fh:
        fh.write(_jsonl_header(config))
        for qa in qa_split:
            plan_set = planner.plan(qa, top_k)
            fh.write(json.dumps(plan_set.to_json_obj(), ensure_ascii=False) + "\n")
    print(f"planned {len(qa_split)} questions -> {args.out}")
    return EXIT_OK


def cmd_retrieve(args) -> int:
    cfg = _load_config_file(args.config)
    max_paths = _resolve(args, "max_paths", cfg, DEFAULT_MAX_PATHS, int)
    graph = load_graph(args.graph)
    qa_split = load_qa_instances(args.qa)
    plan_sets = load_plan_sets(args.plans)
    config = {"command": "retrieve", "graph": str(args.graph),
              "qa": str(args.qa), "plans": str(args.plans),
              "max_paths": max_paths}

    def solve(qa):
        q_ids = resolve_entity_labels(graph, qa.question_entities)
        plan_set = plan_sets.get(qa.id, PlanSet(qa.id))
        collected = set()
        truncated = False
        n_ungrounded = 0
        for plan in plan_set.plans:
            if plan.unknown_relations(graph.relations):
                n_ungrounded += 1
                continue
            if not q_ids:
                continue
            result = retrieve_reasoning_paths(graph, q_ids, plan, max_paths=max_paths)
            truncated = truncated or result.truncated
            collected.update(result.paths)
        return sorted(collected), truncated, n_ungrounded

    parallelism = _resolve(args, "parallelism", cfg, None, int)
    if parallelism is None:
        parallelism = _default_parallelism(llm_stage=False)
    if parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            retrieved = list(pool.map(solve, qa_split))
    else:
        retrieved = [solve(qa) for qa in qa_split]

    total_paths = 0
    ungrounded = 0
    with staged_output(args.out) as fh:
        fh.write(_jsonl_header(config))
        for qa, (ordered, truncated, n_ungrounded) in zip(qa_split, retrieved):
            total_paths += len(ordered)
            ungrounded += n_ungrounded
            fh.write(json.dumps(
                path_record(qa.id, ordered, graph, truncated), ensure_ascii=False
            ) + "\n")
    print(f"retrieved {total_paths} paths for {len(qa_split)} questions "
          f"(ungrounded plans skipped: {ungrounded})")
    return EXIT_OK


def cmd_answer(args) -> int:
    cfg = _load_config_file(args.config)
    top_n = _resolve(args, "top_n", cfg, 5, int)
    qa_split = load_qa_instances(args.qa)
    records = load_path_records(args.paths)
    mode = {"llm": MODE_LLM, "vote": MODE_VOTE, "raw": MODE_RAW}[args.mode]
    config = {"command": "answer", "qa": str(args.qa), "paths": str(args.paths),
              "mode": mode, "top_n": top_n, "prompt_mode": args.prompt_mode}

    client = None
    if mode == MODE_LLM:
        client, settings = _build_client(args, cfg)
        if client is None:
            raise DataError("llm mode needs --base-url (or config/env)")
        config["model"] = settings["model"]
    examples = ""
    if args.examples_file:
        examples = Path(args.examples_file).read_text(encoding="utf-8")

    def solve(qa) -> AnswerSet:
        label_paths = records.get(qa.id, {}).get("paths", [])
        if mode == MODE_VOTE:
            return vote_label_paths(label_paths, top_n)
        if mode == MODE_RAW:
            return vote_label_paths(label_paths, None)
        block = format_label_paths(label_paths)
        try:
            return llm_reason_block(client, qa.question, block,
                                    mode=args.prompt_mode, examples=examples)
        except TransportError as exc:
            logger.warning("client failure on %s: %s", qa.id, exc)
            return AnswerSet([], mode=MODE_LLM)

    parallelism = _resolve(args, "parallelism", cfg, None, int)
    if parallelism is None:
        parallelism = _default_parallelism(llm_stage=(mode == MODE_LLM))
    if parallelism > 1 and mode == MODE_LLM:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            answer_sets = list(pool.map(solve, qa_split))
    else:
        answer_sets = [solve(qa) for qa in qa_split]

    with staged_output(args.out) as fh:
        fh.write(_jsonl_header(config))
        for qa, answer_set in zip(qa_split, answer_sets):
            obj = {"id": qa.id, "prediction": list(answer_set.answers),
                   "mode": answer_set.mode}
            if answer_set.raw_text is not None:
                obj["raw_text"] = answer_set.raw_text
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    print(f"answered {len(qa_split)} questions -> {args.out}")
    return EXIT_OK


def _write_eval_outputs(prefix: Path, rows: list[tuple[str, MetricReport]],
                        config: dict, figure: bool) -> None:
    from . import report as report_mod

    with staged_output(_with_ext(prefix, ".txt")) as fh:
        fh.write(_text_header(config))
        if len(rows) == 1:
            fh.write(report_mod.eval_report_text(rows[0][1], rows[0][0]))
        else:
            fh.write(report_mod.metric_table(rows))
    with staged_output(_with_ext(prefix, ".json")) as fh:
        fh.write(report_mod.metrics_json(rows, config))
    if figure:
        if len(rows) == 1:
            report_mod.save_breakdown_figure(rows[0][1], str(_with_ext(prefix, ".png")))
        else:
            report_mod.save_metrics_figure(rows, str(_with_ext(prefix, ".png")))


def cmd_eval(args) -> int:
    cfg = _load_config_file(args.config)
    qa_split = load_qa_instances(args.qa)
    predictions = load_answer_sets(args.predictions)
    normalized = not args.no_normalize
    report = score(predictions, qa_split, normalized=normalized)
    config = {"command": "eval", "qa": str(args.qa),
              "predictions": str(args.predictions), "normalized": normalized,
              "averaging": report.averaging}
    prefix = Path(args.out_prefix)
    _write_eval_outputs(prefix, [("model", report)], config, not args.no_figure)
    from . import report as report_mod
    print(report_mod.eval_report_text(report, "model"), end="")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config_file(args.config)
    top_k = _resolve(args, "top_k", cfg, 3, int)
    top_n = _resolve(args, "top_n", cfg, 5, int)
    max_len = _resolve(args, "max_len", cfg, 4, int)
    graph = load_graph(args.graph)
    qa_split = load_qa_instances(args.qa)
    client, settings = _build_client(args, cfg)
    reasoner = args.reasoner
    if reasoner == "llm" and client is None:
        raise DataError("--reasoner llm needs --base-url (or config/env)")
    planner = OraclePlanner(graph, max_len=max_len)
    parallelism = _resolve(args, "parallelism", cfg, None, int)
    if parallelism is None:
        parallelism = _default_parallelism(llm_stage=(reasoner == "llm"))

    results = run_ablations(
        graph, qa_split, planner, top_k, args.seed,
        client=client, reasoner=reasoner, top_n=top_n, max_len=max_len,
        parallelism=parallelism,
    )
    config = {"command": "ablate", "graph": str(args.graph), "qa": str(args.qa),
              "top_k": top_k, "top_n": top_n, "max_len": max_len,
              "seed": args.seed, "reasoner": reasoner}

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for mode in ABLATION_MODES:
        result = results[mode]
        rows.append((ABLATION_LABELS[mode], result.report))
        with staged_output(out_dir / f"predictions_{mode}.jsonl") as fh:
            fh.write(_jsonl_header({**config, "mode": mode}))
            for qa in qa_split:
                answer_set = result.predictions[qa.id]
                obj = {"id": qa.id, "prediction": list(answer_set.answers),
                       "mode": answer_set.mode}
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
        with staged_output(out_dir / f"metrics_{mode}.json") as fh:
            fh.write(json.dumps(result.report.to_dict(), indent=2) + "\n")

    from . import report as report_mod
    with staged_output(out_dir / "ablation.txt") as fh:
        fh.write(_text_header(config))
        fh.write(report_mod.metric_table(rows))
    with staged_output(out_dir / "ablation.json") as fh:
        fh.write(report_mod.metrics_json(rows, config))
    report_mod.save_metrics_figure(rows, str(out_dir / "ablation.png"))
    print(report_mod.metric_table(rows), end="")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _load_config_file(args.config)
    max_len = _resolve(args, "max_len", cfg, 4, int)
    graph = load_graph(args.graph)
    qa_split = load_qa_instances(args.qa)
    k_values = [int(v) for v in args.k_values.split(",") if v.strip() != ""]
    if not k_values:
        raise DataError("--k-values must name at least one K")
    planner = OraclePlanner(graph, max_len=max_len)
    profile = profile_retrieval(graph, qa_split, planner, k_values)
    config = {"command": "profile", "graph": str(args.graph), "qa": str(args.qa),
              "k_values": k_values, "max_len": max_len}

    from . import report as report_mod
    prefix = Path(args.out_prefix)
    with staged_output(prefix.with_suffix(".tsv")) as fh:
        fh.write(_text_header(config))
        fh.write(report_mod.profile_table(profile))
    with staged_output(_with_ext(prefix, ".json")) as fh:
        fh.write(json.dumps({"config": config, "profile": profile}, indent=2) + "\n")
    report_mod.save_profile_figure(profile, str(_with_ext(prefix, ".png")))
    print(report_mod.profile_table(profile), end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = random_graph(args.entities, args.relations, args.triples, args.seed)
    kg_path = out_dir / ("kg.tsv.gz" if args.gzip else "kg.tsv")
    save_graph(graph, kg_path)
    if args.kind == "benchmark":
        questions = closed_loop_questions(graph, BenchmarkConfig(
            n_questions=args.questions, max_hops=args.max_hops, seed=args.seed))
    else:
        questions = random_walk_questions(graph, args.questions, args.max_hops, args.seed)
    save_qa_instances(questions, out_dir / "qa.jsonl")
    print(f"wrote {graph.n_triples} triples and {len(questions)} questions to {out_dir}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def build_parser() -> Parser:
    parser = Parser(prog="kgreason", description=__doc__,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    kg = sub.add_parser("kg", help="inspect or slice a graph")
    kg_sub = kg.add_subparsers(dest="kg_command", required=True)
    kg_stats = kg_sub.add_parser("stats", help="entity/relation/triple counts")
    kg_stats.add_argument("--graph", required=True)
    kg_stats.add_argument("--add-inverse", action="store_true",
                          help="materialize inv:: reverse relations at load")
    kg_stats.add_argument("--json", action="store_true")
    kg_stats.set_defaults(func=cmd_kg_stats)
    kg_sub_p = kg_sub.add_parser("subgraph", help="hop-bounded forward subgraph")
    kg_sub_p.add_argument("--graph", required=True)
    kg_sub_p.add_argument("--seeds", required=True, help="comma-separated entity labels")
    kg_sub_p.add_argument("--max-hops", type=int, required=True)
    kg_sub_p.add_argument("--add-inverse", action="store_true")
    kg_sub_p.add_argument("--out", required=True)
    kg_sub_p.set_defaults(func=cmd_kg_subgraph)

    plans = sub.add_parser("plans", help="gold supervision extraction")
    plans_sub = plans.add_subparsers(dest="plans_command", required=True)
    extract = plans_sub.add_parser("extract", help="shortest relation paths per question")
    extract.add_argument("--graph", required=True)
    extract.add_argument("--qa", required=True)
    extract.add_argument("--max-len", type=int, dest="max_len")
    extract.add_argument("--config")
    extract.add_argument("--out", required=True)
    extract.set_defaults(func=cmd_plans_extract)

    ds = sub.add_parser("dataset", help="instruction-tuning dataset building")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)
    build = ds_sub.add_parser("build")
    build.add_argument("--graph", required=True)
    build.add_argument("--qa", required=True)
    build.add_argument("--kind", choices=("planning", "reasoning", "both"),
                       default="both")
    build.add_argument("--max-len", type=int, dest="max_len")
    build.add_argument("--plan-cap", type=int, dest="plan_cap")
    build.add_argument("--config")
    build.add_argument("--out-dir", required=True)
    build.set_defaults(func=cmd_dataset_build)

    plan = sub.add_parser("plan", help="produce top-K plans per question")
    plan.add_argument("--backend", choices=("oracle", "file", "llm"), required=True)
    plan.add_argument("--qa", required=True)
    plan.add_argument("--graph")
    plan.add_argument("--plans-file", help="stored plans (file backend)")
    plan.add_argument("--top-k", type=int, dest="top_k")
    plan.add_argument("--max-len", type=int, dest="max_len")
    plan.add_argument("--config")
    plan.add_argument("--out", required=True)
    _add_llm_flags(plan)
    plan.set_defaults(func=cmd_plan)

    retrieve = sub.add_parser("retrieve", help="constrained-BFS path retrieval")
    retrieve.add_argument("--graph", required=True)
    retrieve.add_argument("--qa", required=True)
    retrieve.add_argument("--plans", required=True)
    retrieve.add_argument("--max-paths", type=int, dest="max_paths")
    retrieve.add_argument("--parallelism", type=int)
    retrieve.add_argument("--config")
    retrieve.add_argument("--out", required=True)
    retrieve.set_defaults(func=cmd_retrieve)

    answer = sub.add_parser("answer", help="aggregate retrieved paths into answers")
    answer.add_argument("--mode", choices=("llm", "vote", "raw"), required=True)
    answer.add_argument("--qa", required=True)
    answer.add_argument("--paths", required=True)
    answer.add_argument("--top-n", type=int, dest="top_n")
    answer.add_argument("--prompt-mode", choices=("answer", "explain"),
                        default="answer")
    answer.add_argument("--examples-file", help="few-shot block for explain mode")
    answer.add_argument("--parallelism", type=int)
    answer.add_argument("--config")
    answer.add_argument("--out", required=True)
    _add_llm_flags(answer)
    answer.set_defaults(func=cmd_answer)

    ev = sub.add_parser("eval", help="score predictions against gold answers")
    ev.add_argument("--qa", required=True)
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--no-normalize", action="store_true",
                    help="match answers without normalization")
    ev.add_argument("--no-figure", action="store_true")
    ev.add_argument("--config")
    ev.add_argument("--out-prefix", required=True)
    ev.set_defaults(func=cmd_eval)

    ablate = sub.add_parser("ablate", help="run the four ablation modes")
    ablate.add_argument("--graph", required=True)
    ablate.add_argument("--qa", required=True)
    ablate.add_argument("--top-k", type=int, dest="top_k")
    ablate.add_argument("--top-n", type=int, dest="top_n")
    ablate.add_argument("--max-len", type=int, dest="max_len")
    ablate.add_argument("--seed", type=int, required=True,
                        help="required: seeds the random-plans mode")
    ablate.add_argument("--reasoner", choices=("vote", "llm"), default="vote")
    ablate.add_argument("--parallelism", type=int)
    ablate.add_argument("--config")
    ablate.add_argument("--out-dir", required=True)
    _add_llm_flags(ablate)
    ablate.set_defaults(func=cmd_ablate)

    profile = sub.add_parser("profile", help="retrieval cost and coverage per K")
    profile.add_argument("--graph", required=True)
    profile.add_argument("--qa", required=True)
    profile.add_argument("--k-values", default="1,2,3,5")
    profile.add_argument("--max-len", type=int, dest="max_len")
    profile.add_argument("--config")
    profile.add_argument("--out-prefix", required=True)
    profile.set_defaults(func=cmd_profile)

    synth = sub.add_parser("synth", help="generate a seeded random graph and QA split")
    synth.add_argument("--entities", type=int, default=2000)
    synth.add_argument("--relations", type=int, default=20)
    synth.add_argument("--triples", type=int, default=10000)
    synth.add_argument("--questions", type=int, default=500)
    synth.add_argument("--max-hops", type=int, default=4)
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--kind", choices=("benchmark", "walks"), default="benchmark")
    synth.add_argument("--gzip", action="store_true")
    synth.add_argument("--out-dir", required=True)
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"kgreason: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DataError, OSError) as exc:
        print(f"kgreason: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KgreasonError as exc:
        print(f"kgreason: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
