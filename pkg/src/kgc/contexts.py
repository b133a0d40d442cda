"""Held-out splits and compressed-context generation.

A compressed context is a small candidate set built around one held-out
triple: the truth (unless the context is distractor-only) plus corruptions
of a single position. The agent must pick the true candidate or reject.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import GenerationError
from .kg import KnowledgeGraph, Triple

MAX_ATTEMPTS = 100

# Shuffles and per-episode generation draw from separate streams of one seed.
_SHUFFLE_STREAM = 0x5EED


class AmbiguityKind(enum.Enum):
    MASKED_TAIL = "masked-tail"
    MASKED_HEAD = "masked-head"
    MASKED_RELATION = "masked-relation"


_KINDS = (AmbiguityKind.MASKED_HEAD, AmbiguityKind.MASKED_RELATION, AmbiguityKind.MASKED_TAIL)


@dataclass(frozen=True)
class CompressedContext:
    candidates: tuple[Triple, ...]
    correct_index: int | None
    ambiguity_kind: AmbiguityKind
    # originating held-out triple; kept for distractor-only contexts too
    source: Triple

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a context needs at least one candidate")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be pairwise distinct")
        if self.correct_index is not None and self.candidates[self.correct_index] != self.source:
            raise ValueError("correct_index must point at the source triple")

    @property
    def K(self) -> int:
        return len(self.candidates)

    @property
    def correct_action(self) -> int:
        """Index of the right decision: the true candidate, or Reject (= K)."""
        return self.K if self.correct_index is None else self.correct_index


@dataclass
class HoldoutSplit:
    train_graph: KnowledgeGraph
    holdout: list[Triple]
    seed: int = 0

    def subset(self, triples: Sequence[Triple]) -> "HoldoutSplit":
        """Same train graph, different slice of held-out triples."""
        return HoldoutSplit(self.train_graph, list(triples), self.seed)

    def partition(self, fraction: float) -> tuple["HoldoutSplit", "HoldoutSplit"]:
        """Split the holdout in order into a leading slice and the remaining ``fraction``."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
        cut = len(self.holdout) - int(fraction * len(self.holdout))
        return self.subset(self.holdout[:cut]), self.subset(self.holdout[cut:])


@dataclass(frozen=True)
class Episode:
    contexts: tuple[CompressedContext, ...]
    episode_seed: int = 0

    def __post_init__(self):
        if not self.contexts:
            raise ValueError("an episode needs at least one context")

    def __len__(self) -> int:
        return len(self.contexts)


def split_holdout(graph: KnowledgeGraph, fraction: float, seed: int) -> HoldoutSplit:
    """Move about ``fraction`` of the triples into a held-out list.

    Triples are visited in a seeded random order; one whose removal would
    drop an entity or relation from the training graph is skipped.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    train = graph.copy()
    target = int(fraction * len(graph))
    holdout: list[Triple] = []
    if target == 0:
        return HoldoutSplit(train, holdout, seed)
    order = sorted(graph.triples)
    rng = np.random.default_rng(seed)
    for i in rng.permutation(len(order)):
        t = order[i]
        if train.degree(t.head) <= (2 if t.head == t.tail else 1) or train.degree(t.tail) <= 1:
            continue
        train.remove(t)
        if t.relation not in train.relations:
            train.insert(t)
            continue
        holdout.append(t)
        if len(holdout) == target:
            break
    return HoldoutSplit(train, holdout, seed)


def _corrupt(truth: Triple, kind: AmbiguityKind, entities: list[str], relations: list[str], rng) -> Triple:
    if kind is AmbiguityKind.MASKED_RELATION:
        return truth._replace(relation=relations[rng.integers(len(relations))])
    e = entities[rng.integers(len(entities))]
    if kind is AmbiguityKind.MASKED_HEAD:
        return truth._replace(head=e)
    return truth._replace(tail=e)


def make_context(
    truth: Triple,
    graph: KnowledgeGraph,
    K: int,
    distractor_only: bool,
    rng: np.random.Generator,
    exclude: set[Triple] | frozenset = frozenset(),
) -> CompressedContext:
    """Build one context around ``truth``.

    Corruptions replace a single, uniformly chosen position with a uniform
    draw from the graph's vocabulary. Draws that are already in ``graph``,
    in ``exclude``, equal to ``truth`` or duplicate another candidate are
    rejected, at most ``MAX_ATTEMPTS`` times per candidate.
    """
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    kind = _KINDS[rng.integers(len(_KINDS))]
    n_corrupt = K if distractor_only else K - 1
    entities, relations = graph.sorted_vocabulary()
    chosen: list[Triple] = []
    taken = {truth}
    for _ in range(n_corrupt):
        for _attempt in range(MAX_ATTEMPTS):
            cand = _corrupt(truth, kind, entities, relations, rng)
            if cand not in taken and cand not in graph and cand not in exclude:
                break
        else:
            raise GenerationError(
                f"could not draw {n_corrupt} distinct {kind.value} corruptions of {truth}"
            )
        taken.add(cand)
        chosen.append(cand)
    if distractor_only:
        return CompressedContext(tuple(chosen), None, kind, truth)
    slot = int(rng.integers(K))
    chosen.insert(slot, truth)
    return CompressedContext(tuple(chosen), slot, kind, truth)


def episode_stream(
    split: HoldoutSplit,
    K: int,
    M: int,
    distractor_prob: float,
    seed: int,
) -> list[Episode]:
    """Partition a seeded shuffle of the holdout into episodes of ``M`` contexts.

    Episode ``i`` is generated from its own generator seeded with
    ``seed + i``. A trailing remainder shorter than ``M`` is dropped.
    """
    if M < 1 or M > len(split.holdout):
        raise ValueError(f"M must lie in [1, {len(split.holdout)}], got {M}")
    if not 0.0 <= distractor_prob <= 1.0:
        raise ValueError(f"distractor_prob must lie in [0, 1], got {distractor_prob}")
    order = np.random.default_rng([seed, _SHUFFLE_STREAM]).permutation(len(split.holdout))
    exclude = frozenset(split.holdout)
    episodes = []
    for i in range(len(order) // M):
        ep_seed = seed + i
        rng = np.random.default_rng(ep_seed)
        ctxs = []
        for j in order[i * M:(i + 1) * M]:
            distractor = bool(rng.random() < distractor_prob)
            ctxs.append(make_context(split.holdout[j], split.train_graph, K, distractor, rng, exclude))
        episodes.append(Episode(tuple(ctxs), ep_seed))
    return episodes


def cycle_episodes(
    split: HoldoutSplit, K: int, M: int, distractor_prob: float, seed: int
) -> Iterator[Episode]:
    """Endless episode supply; each pass regenerates corruptions with fresh seeds."""
    per_pass = len(split.holdout) // M
    p = 0
    while True:
        yield from episode_stream(split, K, M, distractor_prob, seed + p * per_pass)
        p += 1


def sample_contexts(
    split: HoldoutSplit, n: int, K: int, M: int, distractor_prob: float, seed: int
) -> list[CompressedContext]:
    """First ``n`` contexts of :func:`cycle_episodes`, flattened."""
    out: list[CompressedContext] = []
    for ep in cycle_episodes(split, K, M, distractor_prob, seed):
        out.extend(ep.contexts)
        if len(out) >= n:
            return out[:n]
    return out


# -- dump format ---------------------------------------------------------------

def _fmt_triple(t: Triple) -> str:
    return "|".join(t)


def dump_contexts(episodes: Sequence[Episode], path: str | Path | None = None) -> str:
    """TSV dump: episode, position, candidates (h|r|t joined by commas), correct index or '-', kind."""
    lines = []
    for e, ep in enumerate(episodes):
        for pos, ctx in enumerate(ep.contexts):
            cands = ",".join(_fmt_triple(t) for t in ctx.candidates)
            correct = "-" if ctx.correct_index is None else str(ctx.correct_index)
            lines.append(f"{e}\t{pos}\t{cands}\t{correct}\t{ctx.ambiguity_kind.value}\t{_fmt_triple(ctx.source)}\n")
    text = "".join(lines)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_contexts(path: str | Path) -> list[list[CompressedContext]]:
    """Inverse of :func:`dump_contexts`, grouped by episode."""
    grouped: dict[int, list[CompressedContext]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        ep, _pos, cands, correct, kind, source = line.split("\t")
        ctx = CompressedContext(
            tuple(Triple(*c.split("|")) for c in cands.split(",")),
            None if correct == "-" else int(correct),
            AmbiguityKind(kind),
            Triple(*source.split("|")),
        )
        grouped.setdefault(int(ep), []).append(ctx)
    return [grouped[k] for k in sorted(grouped)]
