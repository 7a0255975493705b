import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgreason.store import KnowledgeGraph

# filled by the acceptance module's criterion decorator
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)

# The 2-triple family graph: vote and raw both answer {Charlie}.
FAMILY_TRIPLES = [
    ("Alice", "marry_to", "Bob"),
    ("Bob", "father_of", "Charlie"),
]

# The 3-line TSV variant with a second child.
FAMILY3_TSV = (
    "Alice\tmarry_to\tBob\n"
    "Bob\tfather_of\tCharlie\n"
    "Bob\tfather_of\tDora\n"
)


@pytest.fixture
def family_graph():
    return KnowledgeGraph.from_triples(FAMILY_TRIPLES)


@pytest.fixture
def family3_graph():
    triples = [tuple(line.split("\t")) for line in FAMILY3_TSV.strip().split("\n")]
    return KnowledgeGraph.from_triples(triples)


@pytest.fixture
def family3_tsv(tmp_path):
    path = tmp_path / "family.tsv"
    path.write_text(FAMILY3_TSV, encoding="utf-8")
    return path
