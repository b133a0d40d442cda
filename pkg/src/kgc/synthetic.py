"""Synthetic knowledge graphs with learnable structure.

Entities are grouped into communities and most edges stay inside a
community, so true triples tend to join entities with shared neighbours.
Relation usage follows a Zipf law, so relation identity carries a prior.
Uniformly random graphs would leave nothing for any policy to learn.
"""

from __future__ import annotations

import numpy as np

from .kg import Triple


def make_synthetic_graph(
    n_entities: int = 200,
    n_relations: int = 20,
    n_triples: int = 1000,
    n_communities: int = 40,
    p_intra: float = 1.0,
    relation_skew: float = 4.0,
    seed: int = 0,
) -> list[Triple]:
    """Distinct triples over exactly ``n_entities`` entities and ``n_relations`` relations.

    Returned in generation order.
    """
    if n_entities < 2 or n_relations < 1 or n_communities < 1:
        raise ValueError("need at least 2 entities, 1 relation and 1 community")
    if n_triples < max(n_entities, n_relations):
        raise ValueError("n_triples too small to cover the vocabulary")
    max_triples = n_entities * (n_entities - 1) * n_relations
    if n_triples > max_triples:
        raise ValueError(f"at most {max_triples} distinct triples possible")
    rng = np.random.default_rng(seed)
    width = len(str(n_entities - 1))
    ents = [f"e{i:0{width}d}" for i in range(n_entities)]
    rels = [f"r{k:0{len(str(n_relations - 1))}d}" for k in range(n_relations)]
    community = np.arange(n_entities) % n_communities
    members = [np.flatnonzero(community == c) for c in range(n_communities)]
    weights = 1.0 / np.arange(1, n_relations + 1) ** relation_skew
    weights /= weights.sum()

    def draw_tail(h: int) -> int:
        pool = members[community[h]]
        while True:
            t = int(rng.choice(pool)) if rng.random() < p_intra and len(pool) > 1 else int(rng.integers(n_entities))
            if t != h:
                return t

    seen: set[Triple] = set()
    out: list[Triple] = []

    def add(h: int, r: int, t: int) -> None:
        tr = Triple(ents[h], rels[r], ents[t])
        if tr not in seen:
            seen.add(tr)
            out.append(tr)

    # cover the vocabulary first: every entity heads a triple, every relation is used
    for h in range(n_entities):
        r = h if h < n_relations else int(rng.choice(n_relations, p=weights))
        add(h, r, draw_tail(h))
    for r in range(n_entities, n_relations):
        h = int(rng.integers(n_entities))
        add(h, r, draw_tail(h))
    while len(out) < n_triples:
        h = int(rng.integers(n_entities))
        add(h, int(rng.choice(n_relations, p=weights)), draw_tail(h))
    return out
