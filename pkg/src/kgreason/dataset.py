"""Instruction-tuning dataset builders and split statistics.

Two record kinds are produced from a QA split plus a graph: planning records
(one per gold plan, the serialized plan as target) and reasoning records (one
per question, the gold answer list as target, with the gold plans' grounded
paths rendered into the prompt). Questions whose entities do not resolve or
whose answers are unreachable are skipped and counted, never fatal.

Output ordering is fixed by input order, so builds are deterministic.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .paths import retrieve_reasoning_paths, serialize_plan, shortest_relation_paths
from .planning import QAInstance, build_planning_prompt, resolve_entity_labels
from .reasoning import build_reasoning_prompt, format_reasoning_paths
from .store import KnowledgeGraph

logger = logging.getLogger(__name__)

KIND_PLANNING = "planning"
KIND_REASONING = "reasoning"

HOP_BUCKETS = ("1 hop", "2 hop", ">=3 hop", "unknown")
ANSWER_BUCKETS = ("1", "2-4", "5-9", ">=10")


def hop_bucket(hops: int | None) -> str:
    if hops is None:
        return "unknown"
    if hops <= 1:
        return "1 hop"
    if hops == 2:
        return "2 hop"
    return ">=3 hop"


def answer_bucket(n_answers: int) -> str:
    if n_answers <= 1:
        return "1"
    if n_answers <= 4:
        return "2-4"
    if n_answers <= 9:
        return "5-9"
    return ">=10"


@dataclass(frozen=True)
class InstructionRecord:
    """One instruction-tuning example plus bookkeeping fields.

    Only instruction/input/output are externally visible; the rest feeds
    statistics.
    """

    instruction: str
    input: str
    output: str
    question_id: str
    kind: str
    hops: int | None
    n_answers: int

    def to_json_obj(self) -> dict:
        return {
            "instruction": self.instruction,
            "input": self.input,
            "output": self.output,
        }


@dataclass
class BuildReport:
    questions: int = 0
    records: int = 0
    skipped_unresolvable: int = 0
    skipped_unreachable: int = 0
    truncated_extractions: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))


def _gold_plans(graph: KnowledgeGraph, qa: QAInstance, max_len: int,
                plan_cap: int, report: BuildReport):
    q_ids = resolve_entity_labels(graph, qa.question_entities)
    a_ids = resolve_entity_labels(graph, qa.answer_entities)
    if not q_ids or not a_ids:
        report.skipped_unresolvable += 1
        return None, None, None
    found = shortest_relation_paths(graph, q_ids, a_ids, max_len)
    if found.truncated:
        report.truncated_extractions += 1
    if not found.plans:
        report.skipped_unreachable += 1
        return None, None, None
    ranked = sorted(found.plans, key=lambda p: (len(p), p.relations))[:plan_cap]
    return ranked, q_ids, found.distance


def build_planning_instances(qa_split: Sequence[QAInstance], graph: KnowledgeGraph,
                             max_len: int = 4, plan_cap: int = 10,
                             ) -> tuple[list[InstructionRecord], BuildReport]:
    """One record per (question, gold plan): prompt in, serialized plan out."""
    report = BuildReport()
    records: list[InstructionRecord] = []
    for qa in qa_split:
        plans, _, distance = _gold_plans(graph, qa, max_len, plan_cap, report)
        if plans is None:
            continue
        report.questions += 1
        prompt = build_planning_prompt(qa.question)
        for z in plans:
            records.append(InstructionRecord(
                instruction=prompt,
                input=qa.question,
                output=serialize_plan(z, graph.relations),
                question_id=qa.id,
                kind=KIND_PLANNING,
                hops=distance,
                n_answers=len(qa.answer_entities),
            ))
    report.records = len(records)
    return records, report


def build_reasoning_instances(qa_split: Sequence[QAInstance], graph: KnowledgeGraph,
                              max_len: int = 4, plan_cap: int = 10,
                              ) -> tuple[list[InstructionRecord], BuildReport]:
    """One record per question: prompt over gold reasoning paths in, answers out."""
    report = BuildReport()
    records: list[InstructionRecord] = []
    for qa in qa_split:
        plans, q_ids, distance = _gold_plans(graph, qa, max_len, plan_cap, report)
        if plans is None:
            continue
        report.questions += 1
        grounded = []
        for z in plans:
            grounded.extend(retrieve_reasoning_paths(graph, q_ids, z).paths)
        block = format_reasoning_paths(set(grounded), graph)
        answers = list(dict.fromkeys(qa.answer_entities))
        records.append(InstructionRecord(
            instruction=build_reasoning_prompt(qa.question, block, mode="answer"),
            input=qa.question,
            output=json.dumps(answers, ensure_ascii=False),
            question_id=qa.id,
            kind=KIND_REASONING,
            hops=distance,
            n_answers=len(qa.answer_entities),
        ))
    report.records = len(records)
    return records, report


def save_instruction_records(records: Iterable[InstructionRecord],
                             path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")


def load_instruction_records(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {line_no}: invalid JSON ({exc})") from None
            for key in ("instruction", "input", "output"):
                if key not in obj:
                    raise DataError(f"{path}: line {line_no}: missing {key!r}")
            out.append(obj)
    return out


@dataclass
class DatasetStats:
    """Counts and histograms over built instruction records."""

    planning_records: int = 0
    reasoning_records: int = 0
    planning_questions: int = 0
    reasoning_questions: int = 0
    hop_histogram: dict[str, int] = field(default_factory=dict)
    answer_histogram: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "planning_records": self.planning_records,
            "reasoning_records": self.reasoning_records,
            "planning_questions": self.planning_questions,
            "reasoning_questions": self.reasoning_questions,
            "hop_histogram": dict(self.hop_histogram),
            "answer_histogram": dict(self.answer_histogram),
        }

    def to_text(self) -> str:
        rows = [
            ("planning records", self.planning_records),
            ("reasoning records", self.reasoning_records),
            ("planning questions", self.planning_questions),
            ("reasoning questions", self.reasoning_questions),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {value:>8}" for name, value in rows]
        lines.append("")
        lines.append("hops          questions")
        for bucket in HOP_BUCKETS:
            if bucket in self.hop_histogram:
                lines.append(f"{bucket:<12}  {self.hop_histogram[bucket]:>8}")
        lines.append("")
        lines.append("answers       questions")
        for bucket in ANSWER_BUCKETS:
            if bucket in self.answer_histogram:
                lines.append(f"{bucket:<12}  {self.answer_histogram[bucket]:>8}")
        return "\n".join(lines)


def dataset_stats(records: Iterable[InstructionRecord]) -> DatasetStats:
    """Record counts per kind plus hop/answer-count histograms over questions."""
    stats = DatasetStats()
    per_question: dict[str, InstructionRecord] = {}
    planning_qs: set[str] = set()
    reasoning_qs: set[str] = set()
    for record in records:
        if record.kind == KIND_PLANNING:
            stats.planning_records += 1
            planning_qs.add(record.question_id)
        elif record.kind == KIND_REASONING:
            stats.reasoning_records += 1
            reasoning_qs.add(record.question_id)
        else:
            raise DataError(f"unknown record kind: {record.kind!r}")
        per_question.setdefault(record.question_id, record)
    stats.planning_questions = len(planning_qs)
    stats.reasoning_questions = len(reasoning_qs)
    hops = Counter(hop_bucket(r.hops) for r in per_question.values())
    answers = Counter(answer_bucket(r.n_answers) for r in per_question.values())
    stats.hop_histogram = {b: hops[b] for b in HOP_BUCKETS if hops[b]}
    stats.answer_histogram = {b: answers[b] for b in ANSWER_BUCKETS if answers[b]}
    return stats
