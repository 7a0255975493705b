"""Scoring, the end-to-end pipeline, ablation modes, and retrieval profiling.

Metrics are macro-averaged: hits/precision/recall/F1 are computed per
question and then meaned. Matching is on normalized strings (trim, collapse
whitespace, case-fold), since model output is text while gold answers are
entity labels; normalization can be switched off and the report records
which rule was used.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .dataset import answer_bucket, hop_bucket
from .errors import DataError, TransportError, UngroundedPlanError
from .paths import ReasoningPath, retrieve_reasoning_paths, DEFAULT_MAX_PATHS
from .planning import PlannerBackend, QAInstance, resolve_entity_labels
from .reasoning import (
    MODE_LLM,
    MODE_RAW,
    MODE_VOTE,
    AnswerSet,
    format_reasoning_paths,
    llm_reason_block,
    normalize_answer,
    raw_endpoint_answers,
    vote_answers,
)
from .store import KnowledgeGraph

logger = logging.getLogger(__name__)

ANSWER_MODES = (MODE_LLM, MODE_VOTE, MODE_RAW)

ABLATION_MODES = (
    "without_planning",
    "without_reasoning",
    "random_plans",
    "vote_reasoning",
)
ABLATION_LABELS = {
    "without_planning": "w/o planning",
    "without_reasoning": "w/o reasoning",
    "random_plans": "w/ random plans",
    "vote_reasoning": "w/ vote reasoning",
}


@dataclass
class MetricReport:
    n_questions: int
    hits_at_1: float
    precision: float
    recall: float
    f1: float
    averaging: str = "macro"
    normalized: bool = True
    by_hops: dict[str, dict] | None = None
    by_answer_count: dict[str, dict] | None = None
    diagnostics: dict[str, int] = field(default_factory=dict)
    retrieval_profile: list[dict] | None = None

    def to_dict(self) -> dict:
        out = {
            "n_questions": self.n_questions,
            "hits_at_1": self.hits_at_1,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "averaging": self.averaging,
            "normalized": self.normalized,
        }
        if self.by_hops is not None:
            out["by_hops"] = self.by_hops
        if self.by_answer_count is not None:
            out["by_answer_count"] = self.by_answer_count
        if self.diagnostics:
            out["diagnostics"] = dict(sorted(self.diagnostics.items()))
        if self.retrieval_profile is not None:
            out["retrieval_profile"] = self.retrieval_profile
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _question_metrics(pred: AnswerSet, gold: QAInstance,
                      normalized: bool) -> tuple[float, float, float, float]:
    norm = normalize_answer if normalized else (lambda s: s)
    gold_set = {norm(a) for a in gold.answer_entities}
    pred_list = [norm(a) for a in pred.answers]
    pred_set = set(pred_list)
    hit = 1.0 if pred_list and pred_list[0] in gold_set else 0.0
    overlap = len(pred_set & gold_set)
    precision = overlap / len(pred_set) if pred_set else 0.0
    recall = overlap / len(gold_set) if gold_set else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    return hit, precision, recall, f1


def score(predictions: Mapping[str, AnswerSet], gold: Sequence[QAInstance],
          normalized: bool = True) -> MetricReport:
    """Score predictions against gold answers; missing predictions count as empty.

    Prediction ids must all appear in the gold split; duplicates in the gold
    split are rejected too, since they would double-count.
    """
    gold_ids = [qa.id for qa in gold]
    if len(set(gold_ids)) != len(gold_ids):
        raise DataError("duplicate question ids in gold split")
    unknown = set(predictions) - set(gold_ids)
    if unknown:
        raise DataError(
            "prediction ids missing from gold split: "
            + ", ".join(sorted(unknown)[:5])
        )

    empty = AnswerSet([], mode="empty")
    per_q = []
    hop_groups: dict[str, list[tuple[float, float, float, float]]] = {}
    ans_groups: dict[str, list[tuple[float, float, float, float]]] = {}
    any_hops = False
    for qa in gold:
        pred = predictions.get(qa.id, empty)
        metrics = _question_metrics(pred, qa, normalized)
        per_q.append(metrics)
        if qa.hop_count is not None:
            any_hops = True
        hop_groups.setdefault(hop_bucket(qa.hop_count), []).append(metrics)
        ans_groups.setdefault(answer_bucket(len(qa.answer_entities)), []).append(metrics)

    def mean(values: Iterable[float]) -> float:
        values = list(values)
        return sum(values) / len(values) if values else 0.0

    def summarize(groups: dict[str, list]) -> dict[str, dict]:
        out = {}
        for bucket in sorted(groups):
            rows = groups[bucket]
            out[bucket] = {
                "n": len(rows),
                "hits_at_1": mean(r[0] for r in rows),
                "precision": mean(r[1] for r in rows),
                "recall": mean(r[2] for r in rows),
                "f1": mean(r[3] for r in rows),
            }
        return out

    return MetricReport(
        n_questions=len(gold),
        hits_at_1=mean(r[0] for r in per_q),
        precision=mean(r[1] for r in per_q),
        recall=mean(r[2] for r in per_q),
        f1=mean(r[3] for r in per_q),
        normalized=normalized,
        by_hops=summarize(hop_groups) if any_hops else None,
        by_answer_count=summarize(ans_groups) if gold else None,
    )


@dataclass
class PipelineResult:
    predictions: dict[str, AnswerSet]
    report: MetricReport


def _retrieve_for_plans(graph: KnowledgeGraph, q_ids: set[int], plans,
                        max_paths: int, diag: dict[str, int]) -> list[ReasoningPath]:
    collected: set[ReasoningPath] = set()
    for plan in plans:
        try:
            result = retrieve_reasoning_paths(graph, q_ids, plan, max_paths=max_paths)
        except UngroundedPlanError:
            diag["ungrounded_plans"] = diag.get("ungrounded_plans", 0) + 1
            continue
        if result.truncated:
            diag["truncated_retrievals"] = diag.get("truncated_retrievals", 0) + 1
        collected.update(result.paths)
    return sorted(collected)


def run_pipeline(graph: KnowledgeGraph, qa_split: Sequence[QAInstance],
                 planner: PlannerBackend | None, answer_mode: str, k: int,
                 client=None, top_n: int = 5,
                 max_paths: int = DEFAULT_MAX_PATHS,
                 parallelism: int = 1,
                 normalized: bool = True) -> PipelineResult:
    """Plan, retrieve, and aggregate per question, then score the predictions.

    `planner=None` runs with zero retrieved paths (the no-planning ablation:
    in llm mode the prompt simply has an empty paths section). Client errors
    score the question as empty and are counted, never silently dropped.
    """
    if answer_mode not in ANSWER_MODES:
        raise DataError(f"unknown answer mode: {answer_mode!r}")
    if answer_mode == MODE_LLM and client is None:
        raise DataError("llm answer mode needs a configured client")

    diag: dict[str, int] = {}

    def solve(qa: QAInstance) -> AnswerSet:
        q_ids = resolve_entity_labels(graph, qa.question_entities)
        if not q_ids and qa.question_entities:
            diag["unresolved_question_entities"] = (
                diag.get("unresolved_question_entities", 0) + 1
            )
        paths: list[ReasoningPath] = []
        if planner is not None and q_ids:
            plan_set = planner.plan(qa, k)
            if not plan_set.plans:
                diag["empty_plan_sets"] = diag.get("empty_plan_sets", 0) + 1
            paths = _retrieve_for_plans(graph, q_ids, plan_set.plans, max_paths, diag)
        if answer_mode == MODE_VOTE:
            return vote_answers(paths, graph, top_n)
        if answer_mode == MODE_RAW:
            return raw_endpoint_answers(paths, graph)
        block = format_reasoning_paths(paths, graph)
        try:
            return llm_reason_block(client, qa.question, block)
        except TransportError as exc:
            logger.warning("client failure on %s: %s", qa.id, exc)
            diag["client_failures"] = diag.get("client_failures", 0) + 1
            return AnswerSet([], mode=MODE_LLM)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            answer_sets = list(pool.map(solve, qa_split))
    else:
        answer_sets = [solve(qa) for qa in qa_split]

    predictions = {qa.id: ans for qa, ans in zip(qa_split, answer_sets)}
    report = score(predictions, qa_split, normalized=normalized)
    report.diagnostics = diag
    return PipelineResult(predictions, report)


def profile_retrieval(graph: KnowledgeGraph, qa_split: Sequence[QAInstance],
                      planner: PlannerBackend, k_values: Sequence[int],
                      max_paths: int = DEFAULT_MAX_PATHS) -> list[dict]:
    """Per K: mean retrieved-path count, mean retrieval wall time, answer coverage.

    Coverage is the fraction of questions whose retrieved paths terminate in
    at least one gold answer. Retrieval is timed serially per question so the
    numbers are stable; K=0 short-circuits to zero paths and zero coverage.
    """
    if not list(k_values):
        raise DataError("k_values must be nonempty")
    profile = []
    for k in k_values:
        total_paths = 0
        total_seconds = 0.0
        covered = 0
        for qa in qa_split:
            if k <= 0:
                continue
            q_ids = resolve_entity_labels(graph, qa.question_entities)
            if not q_ids:
                continue
            plan_set = planner.plan(qa, k)
            diag: dict[str, int] = {}
            started = time.perf_counter()
            paths = _retrieve_for_plans(graph, q_ids, plan_set.plans, max_paths, diag)
            total_seconds += time.perf_counter() - started
            total_paths += len(paths)
            gold = {normalize_answer(a) for a in qa.answer_entities}
            ent = graph.entities.label
            terminals = {normalize_answer(ent(p.terminal())) for p in paths}
            if terminals & gold:
                covered += 1
        n = len(qa_split)
        profile.append({
            "k": k,
            "mean_paths": total_paths / n if n else 0.0,
            "mean_seconds": total_seconds / n if n else 0.0,
            "answer_coverage": covered / n if n else 0.0,
        })
    return profile


def run_ablations(graph: KnowledgeGraph, qa_split: Sequence[QAInstance],
                  planner: PlannerBackend, k: int, seed: int,
                  client=None, reasoner: str = MODE_VOTE,
                  top_n: int = 5, max_len: int = 4,
                  max_paths: int = DEFAULT_MAX_PATHS,
                  parallelism: int = 1) -> dict[str, PipelineResult]:
    """The four ablation modes, each an ordinary run_pipeline invocation.

    `reasoner` is the base mode used where "the reasoning module" is needed
    (no-planning and random-plans rows); llm requires a client, vote is the
    clientless fallback.
    """
    from .planning import RandomPlanner

    if reasoner not in (MODE_LLM, MODE_VOTE):
        raise DataError(f"reasoner must be llm or vote, got {reasoner!r}")
    if reasoner == MODE_LLM and client is None:
        raise DataError("llm reasoner needs a configured client")

    common = dict(top_n=top_n, max_paths=max_paths, parallelism=parallelism,
                  client=client)
    random_planner = RandomPlanner(graph, max_len=max_len, seed=seed)
    return {
        "without_planning": run_pipeline(
            graph, qa_split, None, reasoner, k, **common),
        "without_reasoning": run_pipeline(
            graph, qa_split, planner, MODE_RAW, k, **common),
        "random_plans": run_pipeline(
            graph, qa_split, random_planner, reasoner, k, **common),
        "vote_reasoning": run_pipeline(
            graph, qa_split, planner, MODE_VOTE, k, **common),
    }
