"""Question instances, plan-producing backends, and the plan-likelihood diagnostic.

Backends share one method, ``plan(qa, k) -> PlanSet``:

* OraclePlanner reads gold shortest relation paths off the graph, which
  isolates retrieval and aggregation quality from any model;
* FilePlanner replays plan sets stored as JSONL;
* LLMPlanner prompts a chat endpoint and parses its output, keeping
  ungrounded plans flagged rather than dropping them silently;
* RandomPlanner samples seeded random grounded paths (the random-plans
  ablation).

Backends are read-only handles and safe to share across threads.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .errors import DataError
from .paths import RelationPath, parse_plan, shortest_relation_paths
from .store import KnowledgeGraph, Vocab

logger = logging.getLogger(__name__)

PLANNING_TEMPLATE = (
    "Please generate a valid relation path that can be helpful for answering "
    "the following question: <Question>"
)


@dataclass(frozen=True)
class QAInstance:
    """One QA item: question text, linked question entities, gold answers."""

    id: str
    question: str
    question_entities: tuple[str, ...]
    answer_entities: tuple[str, ...]
    hop_count: int | None = None


def load_qa_instances(path: str | Path) -> list[QAInstance]:
    """Read QA JSONL ({"id", "question", "question_entities", "answer_entities", "hop_count"?})."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {line_no}: invalid JSON ({exc})") from None
            try:
                instances.append(QAInstance(
                    id=str(obj["id"]),
                    question=obj["question"],
                    question_entities=tuple(obj["question_entities"]),
                    answer_entities=tuple(obj.get("answer_entities", ())),
                    hop_count=obj.get("hop_count"),
                ))
            except KeyError as exc:
                raise DataError(f"{path}: line {line_no}: missing field {exc}") from None
    return instances


def save_qa_instances(instances: Iterable[QAInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qa in instances:
            obj = {
                "id": qa.id,
                "question": qa.question,
                "question_entities": list(qa.question_entities),
                "answer_entities": list(qa.answer_entities),
            }
            if qa.hop_count is not None:
                obj["hop_count"] = qa.hop_count
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def build_planning_prompt(question: str) -> str:
    """Substitute the question into the planning template, once, left to right."""
    return PLANNING_TEMPLATE.replace("<Question>", question, 1)


@dataclass
class PlanSet:
    """Ranked top-K relation paths for one question, with optional log-probs."""

    question_id: str
    plans: list[RelationPath] = field(default_factory=list)
    scores: list[float] | None = None

    def __post_init__(self):
        if self.scores is not None:
            if len(self.scores) != len(self.plans):
                raise DataError(
                    f"plan set {self.question_id!r}: {len(self.scores)} scores "
                    f"for {len(self.plans)} plans"
                )
            for s in self.scores:
                if not math.isfinite(s) or s > 0:
                    raise DataError(
                        f"plan set {self.question_id!r}: score {s} is not a log-probability"
                    )

    def __len__(self) -> int:
        return len(self.plans)

    def top(self, k: int) -> "PlanSet":
        scores = self.scores[:k] if self.scores is not None else None
        return PlanSet(self.question_id, self.plans[:k], scores)

    def to_json_obj(self) -> dict:
        obj: dict = {
            "question_id": self.question_id,
            "plans": [list(p.relations) for p in self.plans],
        }
        if self.scores is not None:
            obj["scores"] = list(self.scores)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PlanSet":
        plans = [RelationPath(tuple(labels)) for labels in obj.get("plans", [])]
        scores = obj.get("scores")
        return cls(str(obj["question_id"]), plans, scores)


def save_plan_sets(plan_sets: Iterable[PlanSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ps in plan_sets:
            fh.write(json.dumps(ps.to_json_obj(), ensure_ascii=False) + "\n")


def load_plan_sets(path: str | Path) -> dict[str, PlanSet]:
    out: dict[str, PlanSet] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ps = PlanSet.from_json_obj(json.loads(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}: line {line_no}: bad plan record ({exc})") from None
            if ps.question_id in out:
                raise DataError(f"{path}: duplicate question_id {ps.question_id!r}")
            out[ps.question_id] = ps
    return out


class PlannerBackend(Protocol):
    def plan(self, qa: QAInstance, k: int) -> PlanSet: ...


class OraclePlanner:
    """Gold shortest relation paths, ranked by length then label order.

    All plans are same-length (shortest), so the tie-break makes the ranking
    total and deterministic, and plan sets for growing k are nested prefixes.
    """

    def __init__(self, graph: KnowledgeGraph, max_len: int = 4):
        self.graph = graph
        self.max_len = max_len

    def plan(self, qa: QAInstance, k: int) -> PlanSet:
        q_ids = resolve_entity_labels(self.graph, qa.question_entities)
        a_ids = resolve_entity_labels(self.graph, qa.answer_entities)
        if not q_ids or not a_ids:
            logger.debug("oracle: %s has unresolvable entities", qa.id)
            return PlanSet(qa.id)
        found = shortest_relation_paths(self.graph, q_ids, a_ids, self.max_len)
        if not found.plans:
            logger.debug("oracle: %s answers unreachable within %d hops", qa.id, self.max_len)
            return PlanSet(qa.id)
        ranked = sorted(found.plans, key=lambda p: (len(p), p.relations))
        return PlanSet(qa.id, ranked[:k])


class FilePlanner:
    """Serve plan sets preloaded from the plans JSONL format."""

    def __init__(self, plan_sets: dict[str, PlanSet]):
        self._plan_sets = plan_sets

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "FilePlanner":
        return cls(load_plan_sets(path))

    def plan(self, qa: QAInstance, k: int) -> PlanSet:
        stored = self._plan_sets.get(qa.id)
        if stored is None:
            return PlanSet(qa.id)
        return stored.top(k)


class RandomPlanner:
    """Uniform random grounded relation sequences, length-bucketed and seeded.

    The RNG is derived per question from (seed, question id), so output does
    not depend on execution order or parallelism.
    """

    def __init__(self, graph: KnowledgeGraph, max_len: int = 4, seed: int = 0):
        self._rel_labels = list(graph.relations)
        self.max_len = max_len
        self.seed = seed

    def plan(self, qa: QAInstance, k: int) -> PlanSet:
        if not self._rel_labels:
            return PlanSet(qa.id)
        rng = random.Random(f"{self.seed}:{qa.id}")
        plans: list[RelationPath] = []
        chosen: set[tuple[str, ...]] = set()
        attempts = 0
        while len(plans) < k and attempts < 20 * k:
            attempts += 1
            length = rng.randint(1, self.max_len)
            labels = tuple(rng.choice(self._rel_labels) for _ in range(length))
            if labels not in chosen:
                chosen.add(labels)
                plans.append(RelationPath(labels))
        return PlanSet(qa.id, plans)


class LLMPlanner:
    """Ask a chat endpoint for k candidate plans and parse its output.

    Structural parse failures are dropped; ungrounded plans are kept (the
    vocab, when given, is only used to log the grounding classification so
    hallucinated relations stay observable downstream). Duplicate plans keep
    their best rank. Candidates are ordered by client-reported score when
    every candidate has one, otherwise by generation order.
    """

    def __init__(self, client, vocab: Vocab | None = None):
        self.client = client
        self.vocab = vocab

    def plan(self, qa: QAInstance, k: int) -> PlanSet:
        prompt = build_planning_prompt(qa.question)
        candidates = self.client.chat([("user", prompt)], n=k)
        scored: list[tuple[RelationPath, float | None]] = []
        for text, score in candidates:
            parsed = parse_plan(text, self.vocab)
            if not parsed.parsed:
                logger.debug("planner: structural parse failure for %s: %r", qa.id, text)
                continue
            if parsed.unknown:
                logger.debug("planner: ungrounded plan for %s: %s", qa.id, parsed.unknown)
            scored.append((parsed.path(), score))

        if scored and all(s is not None for _, s in scored):
            scored.sort(key=lambda item: -item[1])
        deduped: list[tuple[RelationPath, float | None]] = []
        seen: set[tuple[str, ...]] = set()
        for path, score in scored:
            if path.relations in seen:
                continue
            seen.add(path.relations)
            deduped.append((path, score))
        deduped = deduped[:k]

        plans = [p for p, _ in deduped]
        scores = [s for _, s in deduped]
        if any(s is None for s in scores) or any(s is not None and s > 0 for s in scores):
            # endpoint scores that are missing or not log-probs are unusable
            return PlanSet(qa.id, plans)
        return PlanSet(qa.id, plans, scores)


def resolve_entity_labels(graph: KnowledgeGraph, labels: Iterable[str]) -> set[int]:
    """Map entity labels to handles, dropping labels absent from the graph."""
    out = set()
    for label in labels:
        handle = graph.entities.get(label)
        if handle is not None:
            out.add(handle)
    return out


def planning_loss(gold: Iterable[RelationPath],
                  logprob: Callable[[RelationPath], float]) -> float:
    """Mean negative log-probability of the gold plans.

    This is the uniform-posterior KL diagnostic: with Z* the gold set, the
    loss is -(1/|Z*|) * sum(log P(z)) over z in Z*, additive constant
    dropped. Zero exactly when every gold plan has probability one.
    """
    plans = list(gold)
    if not plans:
        raise DataError("planning_loss needs a nonempty gold plan set")
    total = 0.0
    for z in plans:
        lp = logprob(z)
        if not math.isfinite(lp) or lp > 0:
            raise DataError(f"logprob({z.relations}) = {lp} is not a log-probability")
        total += lp
    return -total / len(plans)
