"""Relation paths, grounded reasoning paths, and the operations that connect them.

Three operations live here:

* constrained breadth-first retrieval: given a relation-path plan, walk the
  graph from the question entities taking the plan's i-th relation at the
  i-th step, collecting every complete walk;
* shortest-path extraction: the set of relation-label sequences of all
  minimal-length walks from any question entity to any answer entity, which
  is the supervision signal the planner is trained against;
* plan serialization: the `<PATH> r1 <SEP> r2 </PATH>` wire format and its
  tolerant inverse for free-form model output.

All functions are pure over an immutable graph, so per-question calls are
safe to run in parallel.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .errors import DataError, UngroundedPlanError
from .store import KnowledgeGraph, Vocab

logger = logging.getLogger(__name__)

PATH_OPEN = "<PATH>"
PATH_CLOSE = "</PATH>"
PATH_SEP = "<SEP>"

# Explosion guard: per plan per question. Hitting it sets a truncation flag
# instead of exhausting memory.
DEFAULT_MAX_PATHS = 100_000

PARSE_OK = "ok"
PARSE_UNGROUNDED = "ungrounded"
PARSE_STRUCTURAL = "structural"


class _PlanCapReached(Exception):
    """Internal signal: the shortest-path enumeration hit its guard."""


@dataclass(frozen=True, order=True)
class RelationPath:
    """Ordered relation-label sequence; the unit plans are expressed in.

    The empty path is legal and means "the answer is the question entity".
    Labels rather than graph handles, so a path survives re-interning and can
    exist before grounding is checked.
    """

    relations: tuple[str, ...] = ()

    @classmethod
    def of(cls, *labels: str) -> "RelationPath":
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.relations)

    def __iter__(self):
        return iter(self.relations)

    def unknown_relations(self, vocab: Vocab) -> tuple[str, ...]:
        """Labels missing from `vocab`, original order, deduplicated."""
        seen: dict[str, None] = {}
        for label in self.relations:
            if label not in vocab and label not in seen:
                seen[label] = None
        return tuple(seen)

    def is_grounded(self, graph: KnowledgeGraph) -> bool:
        return not self.unknown_relations(graph.relations)


@dataclass(frozen=True, order=True)
class ReasoningPath:
    """A grounded walk: start entity plus (relation, entity) hops, in handles.

    Every hop must be a triple of the graph the path was retrieved from; the
    relation projection of the steps equals the generating RelationPath.
    """

    start: int
    steps: tuple[tuple[int, int], ...] = ()

    def terminal(self) -> int:
        return self.steps[-1][1] if self.steps else self.start

    def relation_path(self, graph: KnowledgeGraph) -> RelationPath:
        rel = graph.relations.label
        return RelationPath(tuple(rel(r) for r, _ in self.steps))

    def labels(self, graph: KnowledgeGraph) -> tuple[str, ...]:
        """Alternating entity/relation labels: e0, r1, e1, ..., rl, el."""
        ent = graph.entities.label
        rel = graph.relations.label
        out = [ent(self.start)]
        for r, e in self.steps:
            out.append(rel(r))
            out.append(ent(e))
        return tuple(out)


@dataclass
class Retrieval:
    """Result of constrained-BFS retrieval for one plan."""

    paths: list[ReasoningPath]
    truncated: bool = False


@dataclass
class ShortestPaths:
    """Result of shortest-path extraction for one question.

    `distance` is None when no answer is reachable within max_len;
    `unreachable_answers` counts answer entities beyond max_len hops.
    """

    plans: set[RelationPath]
    distance: int | None
    unreachable_answers: int = 0
    truncated: bool = False


def retrieve_reasoning_paths(graph: KnowledgeGraph,
                             question_entities: Iterable[int],
                             plan: RelationPath,
                             max_paths: int = DEFAULT_MAX_PATHS) -> Retrieval:
    """Every walk from a question entity whose i-th edge uses plan's i-th relation.

    Walks, not simple paths: entity revisits are allowed; the plan length
    bounds the queue so the search always terminates. Paths come back
    deduplicated and in deterministic (start, steps) order. A plan with a
    relation label unknown to the graph raises UngroundedPlanError, which is
    distinct from a grounded plan that simply matches nothing.
    """
    if max_paths < 1:
        raise DataError(f"max_paths must be >= 1, got {max_paths}")
    seeds = sorted(set(question_entities))
    if not seeds:
        return Retrieval([], False)
    for s in seeds:
        graph._check_entity(s)

    unknown = plan.unknown_relations(graph.relations)
    if unknown:
        raise UngroundedPlanError(unknown)
    rel_ids = tuple(graph.relations.id_of(label) for label in plan)

    length = len(rel_ids)
    results: list[ReasoningPath] = []
    truncated = False
    queue: deque[tuple[int, int, tuple[tuple[int, int], ...]]] = deque(
        (s, s, ()) for s in seeds
    )
    while queue:
        start, entity, steps = queue.popleft()
        if len(steps) == length:
            results.append(ReasoningPath(start=start, steps=steps))
            if len(results) >= max_paths:
                truncated = bool(queue)
                break
            continue
        next_rel = rel_ids[len(steps)]
        for tail in graph._tails(entity, next_rel):
            queue.append((start, tail, steps + ((next_rel, tail),)))

    # BFS from sorted seeds is already deterministic; sort anyway so the
    # contract does not depend on traversal internals.
    results = sorted(set(results))
    return Retrieval(results, truncated)


def shortest_relation_paths(graph: KnowledgeGraph,
                            question_entities: Iterable[int],
                            answer_entities: Iterable[int],
                            max_len: int = 4,
                            max_plans: int = DEFAULT_MAX_PATHS) -> ShortestPaths:
    """Relation projections of all minimal-length walks from questions to answers.

    Distance d is the global minimum over the (question entity, answer
    entity) product; only length-d walks contribute, and every returned plan
    has length exactly d. If some answer entity is itself a question entity,
    d = 0 and the result is the singleton empty path. No connection within
    `max_len` yields the empty set.
    """
    seeds = sorted(set(question_entities))
    answers = set(answer_entities)
    if not seeds or not answers:
        raise DataError("question and answer entity sets must be nonempty")
    for e in seeds:
        graph._check_entity(e)
    for e in answers:
        graph._check_entity(e)
    if max_len < 1:
        raise DataError(f"max_len must be >= 1, got {max_len}")

    # multi-source BFS levels; a node's level is its minimal hop distance
    dist: dict[int, int] = {s: 0 for s in seeds}
    levels: list[list[int]] = [seeds]
    frontier = seeds
    for depth in range(1, max_len + 1):
        nxt: list[int] = []
        for v in frontier:
            for r in graph.out_relations(v):
                for t in graph._tails(v, r):
                    if t not in dist:
                        dist[t] = depth
                        nxt.append(t)
        levels.append(nxt)
        frontier = nxt
        if not frontier:
            break

    answer_dists = [dist[a] for a in answers if a in dist]
    unreachable = len(answers) - len(answer_dists)
    if not answer_dists:
        return ShortestPaths(set(), None, unreachable)
    d = min(answer_dists)
    if d == 0:
        return ShortestPaths({RelationPath()}, 0, unreachable)

    # Minimal walks advance one BFS level per hop (any lag would imply a
    # shorter connection), so enumerate suffix relation sequences backward
    # from the answers on level d.
    rel_label = graph.relations.label
    suffixes: dict[int, set[tuple[str, ...]]] = {
        a: {()} for a in answers if dist.get(a) == d
    }
    total = 0
    try:
        for level in range(d - 1, -1, -1):
            prev: dict[int, set[tuple[str, ...]]] = {}
            for v in levels[level]:
                acc: set[tuple[str, ...]] = set()
                for r in graph.out_relations(v):
                    label = None
                    for t in graph._tails(v, r):
                        if dist.get(t) != level + 1:
                            continue
                        sufs = suffixes.get(t)
                        if not sufs:
                            continue
                        if label is None:
                            label = rel_label(r)
                        for suf in sufs:
                            seq = (label,) + suf
                            if seq not in acc:
                                acc.add(seq)
                                total += 1
                                if total > max_plans:
                                    raise _PlanCapReached
                if acc:
                    prev[v] = acc
            suffixes = prev
    except _PlanCapReached:
        logger.warning("shortest-path enumeration truncated at %d sequences",
                       max_plans)
        return ShortestPaths(set(), d, unreachable, truncated=True)

    plans = {RelationPath(seq) for s in seeds for seq in suffixes.get(s, ())}
    return ShortestPaths(plans, d, unreachable)


def serialize_plan(plan: RelationPath, vocab: Vocab) -> str:
    """Render a plan as `<PATH> r1 <SEP> r2 </PATH>` with single spaces.

    All relations must be in `vocab`; the empty path renders as
    `<PATH> </PATH>`.
    """
    unknown = plan.unknown_relations(vocab)
    if unknown:
        raise DataError(
            "cannot serialize plan with unknown relations: " + ", ".join(unknown)
        )
    if not plan.relations:
        return f"{PATH_OPEN} {PATH_CLOSE}"
    body = f" {PATH_SEP} ".join(plan.relations)
    return f"{PATH_OPEN} {body} {PATH_CLOSE}"


@dataclass
class PlanParse:
    """Outcome of parsing free-form text for a serialized plan.

    status is one of "ok" (well-delimited and fully grounded, or no vocab
    given), "ungrounded" (parsed, but some labels missing from the vocab),
    "structural" (no well-delimited `<PATH>...</PATH>` span).
    """

    status: str
    labels: tuple[str, ...] = ()
    unknown: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == PARSE_OK

    @property
    def parsed(self) -> bool:
        return self.status in (PARSE_OK, PARSE_UNGROUNDED)

    def path(self) -> RelationPath:
        if not self.parsed:
            raise DataError("no relation path was parsed from the text")
        return RelationPath(self.labels)


def parse_plan(text: str, vocab: Vocab | None = None) -> PlanParse:
    """Extract the first well-delimited plan from arbitrary model output.

    Inverts serialize_plan exactly on valid plans. Whitespace around
    relation names is trimmed; with a vocab, each name is classified
    grounded/ungrounded. Never raises on arbitrary text.
    """
    open_at = text.find(PATH_OPEN)
    if open_at < 0:
        return PlanParse(PARSE_STRUCTURAL)
    close_at = text.find(PATH_CLOSE, open_at + len(PATH_OPEN))
    if close_at < 0:
        return PlanParse(PARSE_STRUCTURAL)
    inner = text[open_at + len(PATH_OPEN):close_at]
    if not inner.strip():
        labels: tuple[str, ...] = ()
    else:
        names = [segment.strip() for segment in inner.split(PATH_SEP)]
        if any(not name for name in names):
            return PlanParse(PARSE_STRUCTURAL)
        labels = tuple(names)
    if vocab is None:
        return PlanParse(PARSE_OK, labels)
    unknown = RelationPath(labels).unknown_relations(vocab)
    if unknown:
        return PlanParse(PARSE_UNGROUNDED, labels, unknown)
    return PlanParse(PARSE_OK, labels)


def path_record(question_id: str, paths: Iterable[ReasoningPath],
                graph: KnowledgeGraph, truncated: bool = False) -> dict:
    """JSONL record for retrieved paths: each path an e0,r1,e1,... label sequence."""
    obj: dict = {
        "question_id": question_id,
        "paths": [list(p.labels(graph)) for p in paths],
    }
    if truncated:
        obj["truncated"] = True
    return obj


def load_path_records(path) -> dict[str, dict]:
    """Read retrieve-output JSONL keyed by question id."""
    out: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
                qid = str(obj["question_id"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}: line {line_no}: bad path record ({exc})") from None
            if qid in out:
                raise DataError(f"{path}: duplicate question_id {qid!r}")
            out[qid] = obj
    return out
