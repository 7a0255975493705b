"""Knowledge-graph triple store and plan-retrieve-answer pipeline for multi-hop QA."""

from .client import ChatClient, ClientConfig
from .errors import (
    DataError,
    GraphParseError,
    KgreasonError,
    ProtocolError,
    TransportError,
    UngroundedPlanError,
    UnknownHandleError,
)
from .evaluate import (
    MetricReport,
    PipelineResult,
    profile_retrieval,
    run_ablations,
    run_pipeline,
    score,
)
from .paths import (
    PlanParse,
    RelationPath,
    ReasoningPath,
    Retrieval,
    ShortestPaths,
    parse_plan,
    retrieve_reasoning_paths,
    serialize_plan,
    shortest_relation_paths,
)
from .planning import (
    FilePlanner,
    LLMPlanner,
    OraclePlanner,
    PlanSet,
    QAInstance,
    RandomPlanner,
    build_planning_prompt,
    load_qa_instances,
    planning_loss,
)
from .reasoning import (
    AnswerSet,
    aggregate_scores,
    build_reasoning_prompt,
    format_reasoning_paths,
    llm_reason,
    normalize_answer,
    parse_answer_list,
    raw_endpoint_answers,
    vote_answers,
)
from .store import KnowledgeGraph, Vocab, extract_subgraph, load_graph, save_graph

__version__ = "0.1.0"

__all__ = [
    "AnswerSet",
    "ChatClient",
    "ClientConfig",
    "DataError",
    "FilePlanner",
    "GraphParseError",
    "KgreasonError",
    "KnowledgeGraph",
    "LLMPlanner",
    "MetricReport",
    "OraclePlanner",
    "PipelineResult",
    "PlanParse",
    "PlanSet",
    "ProtocolError",
    "QAInstance",
    "RandomPlanner",
    "RelationPath",
    "ReasoningPath",
    "Retrieval",
    "ShortestPaths",
    "TransportError",
    "UngroundedPlanError",
    "UnknownHandleError",
    "Vocab",
    "aggregate_scores",
    "build_planning_prompt",
    "build_reasoning_prompt",
    "extract_subgraph",
    "format_reasoning_paths",
    "llm_reason",
    "load_graph",
    "load_qa_instances",
    "normalize_answer",
    "parse_answer_list",
    "parse_plan",
    "planning_loss",
    "profile_retrieval",
    "raw_endpoint_answers",
    "retrieve_reasoning_paths",
    "run_ablations",
    "run_pipeline",
    "save_graph",
    "score",
    "serialize_plan",
    "shortest_relation_paths",
    "vote_answers",
]
