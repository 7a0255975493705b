"""Seeded random graphs and closed-loop QA benchmarks.

The closed-loop benchmark writes questions whose gold answers are exactly
the terminals the gold shortest plans retrieve, so an oracle-planner run has
recall 1.0 by construction. That makes it a fixture for correctness and
profiling, not a model benchmark.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .errors import DataError
from .paths import retrieve_reasoning_paths, shortest_relation_paths
from .planning import QAInstance
from .store import KnowledgeGraph

logger = logging.getLogger(__name__)


def random_graph(n_entities: int, n_relations: int, n_triples: int,
                 seed: int) -> KnowledgeGraph:
    """Uniform random directed triples over dense e*/r* label spaces.

    Duplicates collapse on interning, so the triple count may come out
    slightly below n_triples on dense configurations.
    """
    if n_entities < 1 or n_relations < 1 or n_triples < 0:
        raise DataError("graph dimensions must be positive")
    rng = random.Random(seed)
    ent = [f"e{i}" for i in range(n_entities)]
    rel = [f"r{j}" for j in range(n_relations)]
    triples = [
        (ent[rng.randrange(n_entities)],
         rel[rng.randrange(n_relations)],
         ent[rng.randrange(n_entities)])
        for _ in range(n_triples)
    ]
    return KnowledgeGraph.from_triples(triples)


def _random_walk(graph: KnowledgeGraph, rng: random.Random, start: int,
                 hops: int) -> int | None:
    """Walk `hops` forward edges from start, random relation and tail each step."""
    current = start
    for _ in range(hops):
        rels = graph.out_relations(current)
        if not rels:
            return None
        r = rels[rng.randrange(len(rels))]
        tails = graph._tails(current, r)
        current = tails[rng.randrange(len(tails))]
    return current


@dataclass
class BenchmarkConfig:
    n_questions: int = 500
    max_hops: int = 4
    seed: int = 0
    plan_cap: int = 10           # skip questions with more gold plans than this
    max_gold_answers: int = 25   # skip questions whose closed-loop gold set explodes
    unique_gold_share: float = 0.5


def closed_loop_questions(graph: KnowledgeGraph,
                          config: BenchmarkConfig) -> list[QAInstance]:
    """Questions whose gold answers are the oracle plans' retrieved terminals.

    Hop counts cycle through 1..max_hops; the first `unique_gold_share` of
    questions are constrained to a single gold answer, which keeps the
    unique-terminal subset large enough to assert on.
    """
    rng = random.Random(config.seed)
    starts = [e for e in range(graph.n_entities) if graph.out_relations(e)]
    if not starts:
        raise DataError("graph has no entities with outgoing edges")

    ent = graph.entities.label
    questions: list[QAInstance] = []
    want_unique = int(config.n_questions * config.unique_gold_share)
    attempts = 0
    max_attempts = 400 * config.n_questions
    while len(questions) < config.n_questions and attempts < max_attempts:
        attempts += 1
        hops = 1 + (len(questions) % config.max_hops)
        start = starts[rng.randrange(len(starts))]
        end = _random_walk(graph, rng, start, hops)
        if end is None or end == start:
            continue
        accepted = _fixed_point_gold(graph, start, {end}, config)
        if accepted is None:
            continue
        gold_ids, distance = accepted
        gold = {ent(g) for g in gold_ids}
        if len(questions) < want_unique and len(gold) != 1:
            continue
        idx = len(questions)
        questions.append(QAInstance(
            id=f"q{idx:05d}",
            question=(f"synthetic question {idx}: walk {distance} "
                      f"hop(s) forward from {ent(start)}"),
            question_entities=(ent(start),),
            answer_entities=tuple(sorted(gold)),
            hop_count=distance,
        ))
    if len(questions) < config.n_questions:
        raise DataError(
            f"could only build {len(questions)}/{config.n_questions} questions; "
            "graph too sparse for the requested hop counts"
        )
    return questions


def _fixed_point_gold(graph: KnowledgeGraph, start: int, gold: set[int],
                      config: BenchmarkConfig) -> tuple[set[int], int] | None:
    """Iterate gold = terminals(shortest plans to gold) until stable.

    The stable set is exactly what an oracle-planner run retrieves, which is
    what makes recall 1.0 a construction guarantee rather than a hope. Gives
    up (None) when the loop does not stabilize, the plan set exceeds the cap,
    the gold set explodes, or the question degenerates to distance 0.
    """
    for _ in range(8):
        found = shortest_relation_paths(graph, {start}, gold, config.max_hops)
        if not found.plans or len(found.plans) > config.plan_cap:
            return None
        if found.distance == 0:
            return None
        new_gold: set[int] = set()
        for plan in found.plans:
            for path in retrieve_reasoning_paths(graph, {start}, plan).paths:
                new_gold.add(path.terminal())
        if not new_gold or len(new_gold) > config.max_gold_answers:
            return None
        if new_gold == gold:
            return gold, found.distance
        gold = new_gold
    return None


def random_walk_questions(graph: KnowledgeGraph, n_questions: int,
                          max_hops: int, seed: int) -> list[QAInstance]:
    """Lightweight (question, walk-end) pairs; gold is the single walk terminal.

    No closed-loop guarantee, just cheap fixtures for scale smoke tests where
    only supervision extraction runs.
    """
    rng = random.Random(seed)
    starts = [e for e in range(graph.n_entities) if graph.out_relations(e)]
    if not starts:
        raise DataError("graph has no entities with outgoing edges")
    ent = graph.entities.label
    questions: list[QAInstance] = []
    attempts = 0
    while len(questions) < n_questions and attempts < 100 * n_questions:
        attempts += 1
        hops = 1 + (len(questions) % max_hops)
        start = starts[rng.randrange(len(starts))]
        end = _random_walk(graph, rng, start, hops)
        if end is None:
            continue
        idx = len(questions)
        questions.append(QAInstance(
            id=f"q{idx:05d}",
            question=f"synthetic question {idx}: {hops} hop(s) from {ent(start)}",
            question_entities=(ent(start),),
            answer_entities=(ent(end),),
            hop_count=hops,
        ))
    if len(questions) < n_questions:
        raise DataError(f"could only build {len(questions)}/{n_questions} questions")
    return questions
