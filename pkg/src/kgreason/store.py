"""In-memory directed triple store with interned vocabularies.

A graph is built once from `head<TAB>relation<TAB>tail` lines (optionally
gzip-compressed, detected by magic bytes) and is immutable afterwards, so
any number of threads may read it concurrently. Entities and relations are
interned to dense integer handles; labels are kept verbatim, dots and
underscores included, because relation names carry meaning downstream.
"""

from __future__ import annotations

import gzip
import io
import logging
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import DataError, GraphParseError, UnknownHandleError

logger = logging.getLogger(__name__)

GZIP_MAGIC = b"\x1f\x8b"
INVERSE_PREFIX = "inv::"
COMMENT_CHAR = "#"


class Vocab:
    """Bijective label <-> dense integer handle mapping."""

    __slots__ = ("_labels", "_ids")

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        """Return the handle for `label`, assigning the next dense id if new."""
        handle = self._ids.get(label)
        if handle is None:
            handle = len(self._labels)
            self._ids[label] = handle
            self._labels.append(label)
        return handle

    def id_of(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise UnknownHandleError(f"unknown label: {label!r}") from None

    def get(self, label: str) -> int | None:
        return self._ids.get(label)

    def label(self, handle: int) -> str:
        if not 0 <= handle < len(self._labels):
            raise UnknownHandleError(f"handle {handle} out of range [0, {len(self._labels)})")
        return self._labels[handle]

    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)


class KnowledgeGraph:
    """Immutable directed triple store with a (head, relation) -> tails index.

    Build through :meth:`from_triples` or :func:`load_graph`; do not mutate.
    Neighbor lists are stored sorted, so iteration is deterministic and
    membership checks can bisect.
    """

    __slots__ = ("entities", "relations", "_adj", "_head_rels", "_n_triples")

    def __init__(self, entities: Vocab, relations: Vocab,
                 adj: dict[tuple[int, int], tuple[int, ...]],
                 head_rels: dict[int, tuple[int, ...]],
                 n_triples: int):
        self.entities = entities
        self.relations = relations
        self._adj = adj
        self._head_rels = head_rels
        self._n_triples = n_triples

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, str]],
                     add_inverse: bool = False) -> "KnowledgeGraph":
        """Intern label triples into a new graph, collapsing duplicates.

        With `add_inverse`, every (h, r, t) also materializes
        (t, inv::r, h); the prefix is reserved and must not occur in input.
        """
        entities = Vocab()
        relations = Vocab()
        seen: set[tuple[int, int, int]] = set()
        for head, rel, tail in triples:
            if add_inverse and rel.startswith(INVERSE_PREFIX):
                raise DataError(
                    f"relation label {rel!r} uses the reserved prefix {INVERSE_PREFIX!r}"
                )
            h = entities.intern(head)
            r = relations.intern(rel)
            t = entities.intern(tail)
            seen.add((h, r, t))
            if add_inverse:
                inv = relations.intern(INVERSE_PREFIX + rel)
                seen.add((t, inv, h))

        tails: dict[tuple[int, int], list[int]] = {}
        for h, r, t in seen:
            tails.setdefault((h, r), []).append(t)
        adj = {key: tuple(sorted(ts)) for key, ts in tails.items()}
        head_rels: dict[int, list[int]] = {}
        for h, r in adj:
            head_rels.setdefault(h, []).append(r)
        frozen_head_rels = {h: tuple(sorted(rs)) for h, rs in head_rels.items()}
        return cls(entities, relations, adj, frozen_head_rels, len(seen))

    # -- lookups -----------------------------------------------------------

    def neighbors(self, head: int, relation: int) -> tuple[int, ...]:
        """Tails t with (head, relation, t) in the graph, ascending."""
        self._check_entity(head)
        self._check_relation(relation)
        return self._adj.get((head, relation), ())

    def out_relations(self, head: int) -> tuple[int, ...]:
        """Relations with at least one outgoing edge from `head`, ascending."""
        self._check_entity(head)
        return self._head_rels.get(head, ())

    def has_triple(self, head: int, relation: int, tail: int) -> bool:
        tails = self._adj.get((head, relation), ())
        # neighbor lists are small in practice; linear scan beats bisect setup
        return tail in tails

    def triples(self) -> Iterator[tuple[int, int, int]]:
        """All triples in (head, relation, tail) handle order."""
        for (h, r), ts in sorted(self._adj.items()):
            for t in ts:
                yield (h, r, t)

    def triple_labels(self) -> Iterator[tuple[str, str, str]]:
        ent = self.entities.label
        rel = self.relations.label
        for h, r, t in self.triples():
            yield (ent(h), rel(r), ent(t))

    # -- stats -------------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_triples(self) -> int:
        return self._n_triples

    def stats(self) -> dict[str, int]:
        return {
            "entities": self.n_entities,
            "relations": self.n_relations,
            "triples": self.n_triples,
        }

    # -- internal ----------------------------------------------------------

    def _check_entity(self, handle: int) -> None:
        if not 0 <= handle < len(self.entities):
            raise UnknownHandleError(f"entity handle {handle} not valid in this graph")

    def _check_relation(self, handle: int) -> None:
        if not 0 <= handle < len(self.relations):
            raise UnknownHandleError(f"relation handle {handle} not valid in this graph")

    # internal fast path for hot loops; skips handle validation
    def _tails(self, head: int, relation: int) -> tuple[int, ...]:
        return self._adj.get((head, relation), ())


def _iter_triple_lines(text_stream: IO[str]) -> Iterator[tuple[str, str, str]]:
    for line_no, raw in enumerate(text_stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith(COMMENT_CHAR):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise GraphParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", line_no
            )
        head, rel, tail = (f.strip() for f in fields)
        if not head or not rel or not tail:
            raise GraphParseError("empty field in triple", line_no)
        yield head, rel, tail


def load_graph(source: str | Path | IO[bytes], fmt: str = "tsv",
               add_inverse: bool = False) -> KnowledgeGraph:
    """Load a graph from a triple file (path or binary stream).

    UTF-8 text, one `head<TAB>relation<TAB>tail` per line, `#` comment lines
    ignored. Gzip-compressed content is detected by magic bytes. Empty input
    yields an empty, valid graph. Malformed lines raise GraphParseError with
    the line number.
    """
    if fmt != "tsv":
        raise DataError(f"unknown triple format: {fmt!r}")
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return load_graph(fh, fmt=fmt, add_inverse=add_inverse)

    head_bytes = source.read(2)
    rest = head_bytes + source.read()
    if head_bytes == GZIP_MAGIC:
        rest = gzip.decompress(rest)
    text = io.StringIO(rest.decode("utf-8"))
    graph = KnowledgeGraph.from_triples(_iter_triple_lines(text), add_inverse=add_inverse)
    logger.debug("loaded graph: %s", graph.stats())
    return graph


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    """Write the graph as a TSV triple file; `.gz` paths are gzip-compressed."""
    path = Path(path)
    lines = "".join(f"{h}\t{r}\t{t}\n" for h, r, t in graph.triple_labels())
    data = lines.encode("utf-8")
    if path.suffix == ".gz":
        data = gzip.compress(data)
    path.write_bytes(data)


def extract_subgraph(graph: KnowledgeGraph, seeds: Iterable[int],
                     max_hops: int) -> KnowledgeGraph:
    """Forward hop-bounded subgraph around `seeds`, with vocabularies re-interned.

    Contains every triple reachable as an edge of a forward walk of at most
    `max_hops` edges from any seed, i.e. all outgoing triples of entities
    within `max_hops - 1` forward hops.
    """
    seed_set = set(seeds)
    if not seed_set:
        raise DataError("extract_subgraph needs at least one seed entity")
    if max_hops < 1:
        raise DataError(f"max_hops must be >= 1, got {max_hops}")
    for s in seed_set:
        graph._check_entity(s)

    kept: set[tuple[int, int, int]] = set()
    reached = set(seed_set)
    frontier = seed_set
    for _ in range(max_hops):
        next_frontier: set[int] = set()
        for h in frontier:
            for r in graph.out_relations(h):
                for t in graph._tails(h, r):
                    kept.add((h, r, t))
                    if t not in reached:
                        reached.add(t)
                        next_frontier.add(t)
        if not next_frontier:
            break
        frontier = next_frontier

    ent = graph.entities.label
    rel = graph.relations.label
    label_triples = [(ent(h), rel(r), ent(t)) for h, r, t in sorted(kept)]
    return KnowledgeGraph.from_triples(label_triples)
