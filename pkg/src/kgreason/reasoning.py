"""Turn retrieved reasoning paths into ranked answers.

Aggregation comes in three flavours: majority vote over path terminals,
the raw terminal set (the no-reasoning ablation), and LLM reasoning over a
prompt that embeds the paths as structural sentences. A fourth operation
combines per-plan answer log-scores multiplicatively, treating each plan's
evidence as independent.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .paths import ReasoningPath
from .store import KnowledgeGraph

logger = logging.getLogger(__name__)

MODE_LLM = "llm"
MODE_VOTE = "vote"
MODE_RAW = "raw-endpoints"

REASONING_TEMPLATE = (
    "Based on the reasoning paths, please answer the given question. "
    "Please keep the answer as simple as possible and return all the "
    "possible answers as a list.\n"
    "\n"
    "Reasoning Paths:\n"
    "<Reasoning Paths>\n"
    "\n"
    "Question:\n"
    "<Question>"
)

EXPLANATION_TEMPLATE = (
    "Based on the reasoning paths, please answer the given question and "
    "explain why.\n"
    "\n"
    "Here are some examples:\n"
    "<Examples>\n"
    "\n"
    "Reasoning Paths:\n"
    "<Reasoning Paths>\n"
    "\n"
    "Question:\n"
    "<Question>"
)

# log-score assigned to an answer a plan did not score at all; keeps the
# product finite while penalizing non-support
DEFAULT_FLOOR_LOGP = math.log(1e-6)

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")
# "answer:", "Answers -", "the answers are:" all count as markers
_ANSWER_MARKER = re.compile(r"answers?(?:\s+\w+){0,3}\s*[:\-]\s*", re.IGNORECASE)
_JSON_ARRAY = re.compile(r"\[[^\[\]]*\]", re.DOTALL)


def normalize_answer(text: str) -> str:
    """Trim, collapse internal whitespace, case-fold. Idempotent."""
    return " ".join(text.split()).casefold()


@dataclass
class AnswerSet:
    """Ranked answers with optional aligned, non-increasing scores."""

    answers: list[str]
    scores: list[float] | None = None
    raw_text: str | None = None
    mode: str = MODE_VOTE

    def __post_init__(self):
        if self.scores is not None and len(self.scores) != len(self.answers):
            raise DataError(
                f"{len(self.scores)} scores for {len(self.answers)} answers"
            )
        deduped: list[str] = []
        dedup_scores: list[float] = []
        seen: set[str] = set()
        for i, answer in enumerate(self.answers):
            key = normalize_answer(answer)
            if key in seen:
                continue
            seen.add(key)
            deduped.append(answer)
            if self.scores is not None:
                dedup_scores.append(self.scores[i])
        self.answers = deduped
        if self.scores is not None:
            self.scores = dedup_scores
            for a, b in zip(self.scores, self.scores[1:]):
                if b > a:
                    raise DataError("answer scores must be non-increasing")

    def top1(self) -> str | None:
        return self.answers[0] if self.answers else None


def format_reasoning_paths(paths: Iterable[ReasoningPath],
                           graph: KnowledgeGraph) -> str:
    """One structural sentence per path, entities and relations joined by arrows.

    Lines are sorted lexicographically so the block is deterministic
    regardless of the input collection's iteration order.
    """
    lines = sorted(" → ".join(p.labels(graph)) for p in paths)
    return "\n".join(lines)


def format_label_paths(label_paths: Iterable[Sequence[str]]) -> str:
    """Same rendering as format_reasoning_paths, from raw label sequences."""
    lines = sorted(" → ".join(seq) for seq in label_paths)
    return "\n".join(lines)


def _render(template: str, slots: Mapping[str, str]) -> str:
    """Fill each slot at its position in the template, one pass.

    Substituted content is never rescanned, so paths or questions containing
    slot-like text stay inert.
    """
    positions = []
    for slot in slots:
        at = template.find(slot)
        if at < 0:
            raise DataError(f"template is missing the {slot} slot")
        positions.append((at, slot))
    positions.sort()
    pieces = []
    cursor = 0
    for at, slot in positions:
        pieces.append(template[cursor:at])
        pieces.append(slots[slot])
        cursor = at + len(slot)
    pieces.append(template[cursor:])
    return "".join(pieces)


def build_reasoning_prompt(question: str, paths_block: str,
                           mode: str = "answer", examples: str = "") -> str:
    """Answer-mode or explain-mode prompt with the paths block substituted."""
    if mode == "answer":
        return _render(REASONING_TEMPLATE, {
            "<Reasoning Paths>": paths_block,
            "<Question>": question,
        })
    if mode == "explain":
        return _render(EXPLANATION_TEMPLATE, {
            "<Examples>": examples,
            "<Reasoning Paths>": paths_block,
            "<Question>": question,
        })
    raise DataError(f"unknown reasoning prompt mode: {mode!r}")


def _ranked_terminals(terminals: Iterable[str], top_n: int | None,
                      mode: str) -> AnswerSet:
    counts = Counter(terminals)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if top_n is not None:
        ranked = ranked[:top_n]
    answers = [label for label, _ in ranked]
    scores = [float(count) for _, count in ranked]
    return AnswerSet(answers, scores, mode=mode)


def vote_answers(paths: Iterable[ReasoningPath], graph: KnowledgeGraph,
                 top_n: int = 5) -> AnswerSet:
    """Top-n path terminals by vote count; ties break lexicographically."""
    if top_n < 1:
        raise DataError(f"top_n must be >= 1, got {top_n}")
    ent = graph.entities.label
    return _ranked_terminals((ent(p.terminal()) for p in paths), top_n, MODE_VOTE)


def raw_endpoint_answers(paths: Iterable[ReasoningPath],
                         graph: KnowledgeGraph) -> AnswerSet:
    """All distinct path terminals, scored by occurrence count (no cap)."""
    ent = graph.entities.label
    return _ranked_terminals((ent(p.terminal()) for p in paths), None, MODE_RAW)


def vote_label_paths(label_paths: Iterable[Sequence[str]],
                     top_n: int | None = 5) -> AnswerSet:
    """vote_answers over stored label sequences (terminal = last element)."""
    if top_n is not None and top_n < 1:
        raise DataError(f"top_n must be >= 1, got {top_n}")
    terminals = (seq[-1] for seq in label_paths if seq)
    mode = MODE_VOTE if top_n is not None else MODE_RAW
    return _ranked_terminals(terminals, top_n, mode)


def parse_answer_list(text: str) -> list[str]:
    """Pull an answer list out of free-form model text.

    Priority: a JSON array anywhere in the reply, then a newline/comma list
    after an "answer:" marker, then the whole reply as a single answer. A
    found-but-empty JSON array means "no answers", not a parse failure.
    """
    for match in _JSON_ARRAY.finditer(text):
        try:
            loaded = json.loads(match.group(0))
        except json.JSONDecodeError:
            continue
        if isinstance(loaded, list):
            return [str(item).strip() for item in loaded if str(item).strip()]

    marker = _ANSWER_MARKER.search(text)
    if marker:
        rest = text[marker.end():]
        items = []
        for chunk in re.split(r"[\n,]+", rest):
            cleaned = _LIST_MARKER.sub("", chunk).strip()
            if cleaned:
                items.append(cleaned)
        if items:
            return items

    whole = text.strip()
    return [whole] if whole else []


def llm_reason(client, question: str, paths: Iterable[ReasoningPath],
               graph: KnowledgeGraph, mode: str = "answer",
               examples: str = "") -> AnswerSet:
    """Prompt the endpoint with the formatted paths and parse the reply."""
    block = format_reasoning_paths(paths, graph)
    return llm_reason_block(client, question, block, mode=mode, examples=examples)


def llm_reason_block(client, question: str, paths_block: str,
                     mode: str = "answer", examples: str = "") -> AnswerSet:
    """llm_reason on a pre-rendered paths block (empty block is legal)."""
    prompt = build_reasoning_prompt(question, paths_block, mode=mode, examples=examples)
    candidates = client.chat([("user", prompt)])
    text = candidates[0][0]
    answers = parse_answer_list(text)
    return AnswerSet(answers, raw_text=text, mode=MODE_LLM)


def save_answer_sets(predictions: Mapping[str, AnswerSet], path) -> None:
    """Write predictions JSONL: {"id", "prediction", "mode", "raw_text"?}."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid, answer_set in predictions.items():
            obj: dict = {
                "id": qid,
                "prediction": list(answer_set.answers),
                "mode": answer_set.mode,
            }
            if answer_set.raw_text is not None:
                obj["raw_text"] = answer_set.raw_text
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_answer_sets(path) -> dict[str, AnswerSet]:
    """Read predictions JSONL; duplicate ids are an error."""
    out: dict[str, AnswerSet] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
                qid = str(obj["id"])
                answers = [str(a) for a in obj["prediction"]]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(
                    f"{path}: line {line_no}: bad prediction record ({exc})"
                ) from None
            if qid in out:
                raise DataError(f"{path}: duplicate prediction id {qid!r}")
            out[qid] = AnswerSet(
                answers,
                raw_text=obj.get("raw_text"),
                mode=obj.get("mode", MODE_VOTE),
            )
    return out


def aggregate_scores(per_plan_answer_scores: Mapping[object, Mapping[str, float]],
                     floor: float = DEFAULT_FLOOR_LOGP) -> dict[str, float]:
    """Combine per-plan answer log-scores as if each plan scored independently.

    Per answer, the combined log-score is the sum over plans, with `floor`
    standing in where a plan did not score the answer at all. Summing in log
    space is the product law in probability space.
    """
    if not math.isfinite(floor) or floor > 0:
        raise DataError(f"floor {floor} is not a log-probability")
    answers: set[str] = set()
    for plan_key, answer_scores in per_plan_answer_scores.items():
        for answer, lp in answer_scores.items():
            if not math.isfinite(lp) or lp > 0:
                raise DataError(
                    f"score {lp} for {answer!r} under plan {plan_key!r} "
                    "is not a log-probability"
                )
            answers.add(answer)
    combined: dict[str, float] = {}
    for answer in answers:
        combined[answer] = sum(
            scores.get(answer, floor)
            for scores in per_plan_answer_scores.values()
        )
    return combined
