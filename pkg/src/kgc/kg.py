"""In-memory triple store used as the environment substrate."""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, NamedTuple, TextIO

from .errors import TripleParseError

_FORBIDDEN = ("\t", "\n", "\r")


class Triple(NamedTuple):
    head: str
    relation: str
    tail: str

    def is_valid(self) -> bool:
        return all(
            isinstance(tok, str) and tok and not any(c in tok for c in _FORBIDDEN)
            for tok in self
        )


class InsertOutcome(enum.Enum):
    INSERTED = "inserted"
    ALREADY_PRESENT = "already-present"


class KnowledgeGraph:
    """A set of triples with forward and reverse adjacency indices.

    ``out_index[e]`` holds ``(relation, tail)`` pairs for triples headed by
    ``e``; ``in_index[e]`` holds ``(relation, head)`` pairs for triples
    ending in ``e``. Both are kept exactly in sync with ``triples``.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples: set[Triple] = set()
        self.out_index: dict[str, set[tuple[str, str]]] = defaultdict(set)
        self.in_index: dict[str, set[tuple[str, str]]] = defaultdict(set)
        self._degrees: Counter[str] = Counter()
        self._relation_counts: Counter[str] = Counter()
        self._vocab_cache: tuple[list[str], list[str]] | None = None
        for t in triples:
            self.insert(t)

    # -- vocabulary -----------------------------------------------------
    @property
    def entities(self) -> set[str]:
        return set(self._degrees)

    @property
    def relations(self) -> set[str]:
        return set(self._relation_counts)

    @property
    def n_entities(self) -> int:
        return len(self._degrees)

    @property
    def n_relations(self) -> int:
        return len(self._relation_counts)

    def sorted_vocabulary(self) -> tuple[list[str], list[str]]:
        """Sorted (entities, relations); cached until the next mutation."""
        if self._vocab_cache is None:
            self._vocab_cache = (sorted(self.entities), sorted(self.relations))
        return self._vocab_cache

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, t: object) -> bool:
        return t in self.triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.triples == other.triples

    def __repr__(self) -> str:
        ents, rels = self.sorted_vocabulary()
        return f"KnowledgeGraph(entities={len(ents)}, relations={len(rels)}, triples={len(self)})"

    # -- mutation ---------------------------------------------------------
    def insert(self, t: Triple) -> InsertOutcome:
        t = Triple(*t)
        if not t.is_valid():
            raise ValueError(f"malformed triple: {t!r}")
        if t in self.triples:
            return InsertOutcome.ALREADY_PRESENT
        self.triples.add(t)
        self.out_index[t.head].add((t.relation, t.tail))
        self.in_index[t.tail].add((t.relation, t.head))
        known = self._degrees
        if t.head not in known or t.tail not in known or t.relation not in self._relation_counts:
            self._vocab_cache = None
        self._degrees[t.head] += 1
        self._degrees[t.tail] += 1
        self._relation_counts[t.relation] += 1
        return InsertOutcome.INSERTED

    def remove(self, t: Triple) -> bool:
        """Delete ``t`` if present; vocabulary entries it alone supported vanish."""
        if t not in self.triples:
            return False
        self.triples.discard(t)
        self.out_index[t.head].discard((t.relation, t.tail))
        self.in_index[t.tail].discard((t.relation, t.head))
        for index, key in ((self.out_index, t.head), (self.in_index, t.tail)):
            if not index[key]:
                del index[key]
        for counts, key in (
            (self._degrees, t.head),
            (self._degrees, t.tail),
            (self._relation_counts, t.relation),
        ):
            counts[key] -= 1
            if not counts[key]:
                del counts[key]
                self._vocab_cache = None
        return True

    def copy(self) -> "KnowledgeGraph":
        g = KnowledgeGraph()
        g.triples = set(self.triples)
        g.out_index = defaultdict(set, {k: set(v) for k, v in self.out_index.items()})
        g.in_index = defaultdict(set, {k: set(v) for k, v in self.in_index.items()})
        g._degrees = Counter(self._degrees)
        g._relation_counts = Counter(self._relation_counts)
        g._vocab_cache = self._vocab_cache
        return g

    # -- structural queries -----------------------------------------------
    def neighbors(self, e: str) -> set[str]:
        out = self.out_index.get(e, ())
        inc = self.in_index.get(e, ())
        return {t for _, t in out} | {h for _, h in inc}

    def degree(self, e: str) -> int:
        return self._degrees.get(e, 0)

    def mean_degree(self) -> float:
        n = self.n_entities
        return 2.0 * len(self.triples) / n if n else 0.0

    def neighbor_overlap(self, e1: str, e2: str) -> int:
        return len(self.neighbors(e1) & self.neighbors(e2))

    def check_indices(self) -> bool:
        """True when both adjacency indices rebuild exactly the triple set."""
        from_out = {Triple(h, r, t) for h, adj in self.out_index.items() for r, t in adj}
        from_in = {Triple(h, r, t) for t, adj in self.in_index.items() for r, h in adj}
        return from_out == self.triples == from_in


def build_graph(triples: Iterable[Triple]) -> KnowledgeGraph:
    return KnowledgeGraph(triples)


def insert_triple(graph: KnowledgeGraph, t: Triple) -> InsertOutcome:
    return graph.insert(t)


def degree(graph: KnowledgeGraph, e: str) -> int:
    return graph.degree(e)


def neighbor_overlap(graph: KnowledgeGraph, e1: str, e2: str) -> int:
    return graph.neighbor_overlap(e1, e2)


def parse_triples(stream: Iterable[str]) -> list[Triple]:
    """Parse tab-separated ``head<TAB>relation<TAB>tail`` lines.

    Accepts any iterable of lines (an open file, or a whole string which is
    split on newlines). Blank lines are skipped.
    """
    if isinstance(stream, str):
        # only '\n' separates records; str.splitlines would also split on \x0c etc.
        stream = stream.split("\n")
    triples = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise TripleParseError(lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        if not all(fields):
            raise TripleParseError(lineno, "empty field")
        triples.append(Triple(*fields))
    return triples


def load_triples(path: str | Path) -> list[Triple]:
    with open(path, encoding="utf-8") as fh:
        return parse_triples(fh)


def serialize_triples(triples: Iterable[Triple], out: TextIO | None = None) -> str:
    """TSV text for ``triples`` in the given order."""
    text = "".join(f"{h}\t{r}\t{t}\n" for h, r, t in triples)
    if out is not None:
        out.write(text)
    return text


def serialize(graph: KnowledgeGraph) -> str:
    """Canonical TSV of a graph: lexicographic (head, relation, tail) order."""
    return serialize_triples(sorted(graph.triples))


def write_triples(path: str | Path, triples: Iterable[Triple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        serialize_triples(triples, fh)
