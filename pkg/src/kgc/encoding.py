"""Fixed-size state vectors for (graph, pending context) pairs.

Layout of a state vector, in order:

* 4 global scalars: ``log1p(|entities|)``, ``log1p(|relations|)``,
  ``log1p(|triples|)``, mean degree;
* for each of the K candidates: head, relation and tail embeddings
  (``d_embed`` each), then ``log1p(degree(head))``, ``log1p(degree(tail))``
  and ``log1p(neighbor_overlap(head, tail))``.

So ``d_state = 4 + K * (3 * d_embed + 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._rng import SplitMix64, fnv1a64
from .contexts import CompressedContext
from .kg import KnowledgeGraph

N_GLOBAL = 4
N_LOCAL = 3


@dataclass(frozen=True)
class EncoderConfig:
    d_embed: int = 8
    hash_seed: int = 0
    K: int = 5

    def __post_init__(self):
        if self.d_embed < 1:
            raise ValueError(f"d_embed must be >= 1, got {self.d_embed}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")

    @property
    def slot_width(self) -> int:
        return 3 * self.d_embed + N_LOCAL

    @property
    def d_state(self) -> int:
        return state_dim(self.d_embed, self.K)


def state_dim(d_embed: int, K: int) -> int:
    return N_GLOBAL + K * (3 * d_embed + N_LOCAL)


@lru_cache(maxsize=1 << 16)
def _token_vector(token: str, d_embed: int, hash_seed: int) -> np.ndarray:
    key = (hash_seed & ((1 << 64) - 1)).to_bytes(8, "little") + token.encode("utf-8")
    gen = SplitMix64(fnv1a64(key))
    while True:
        v = np.array([gen.uniform(-1.0, 1.0) for _ in range(d_embed)])
        norm = math.sqrt(float(v @ v))
        if norm > 0.0:
            break
    v /= norm
    v.flags.writeable = False
    return v


def encode_token(token: str, cfg: EncoderConfig) -> np.ndarray:
    """Deterministic unit-norm embedding of an identifier.

    The generator is SplitMix64 seeded with FNV-1a 64 of
    ``hash_seed`` (8 bytes, little endian) followed by the UTF-8 token.
    Components are uniform in [-1, 1) before normalisation.
    """
    if not token:
        raise ValueError("token must be non-empty")
    return _token_vector(token, cfg.d_embed, cfg.hash_seed)


def encode_state(graph: KnowledgeGraph, ctx: CompressedContext, cfg: EncoderConfig) -> np.ndarray:
    if ctx.K != cfg.K:
        raise ValueError(f"context has {ctx.K} candidates, encoder expects K={cfg.K}")
    d = cfg.d_embed
    out = np.empty(cfg.d_state)
    out[0] = math.log1p(graph.n_entities)
    out[1] = math.log1p(graph.n_relations)
    out[2] = math.log1p(len(graph))
    out[3] = graph.mean_degree()
    pos = N_GLOBAL
    for h, r, t in ctx.candidates:
        out[pos:pos + d] = _token_vector(h, d, cfg.hash_seed)
        out[pos + d:pos + 2 * d] = _token_vector(r, d, cfg.hash_seed)
        out[pos + 2 * d:pos + 3 * d] = _token_vector(t, d, cfg.hash_seed)
        pos += 3 * d
        out[pos] = math.log1p(graph.degree(h))
        out[pos + 1] = math.log1p(graph.degree(t))
        out[pos + 2] = math.log1p(graph.neighbor_overlap(h, t))
        pos += N_LOCAL
    return out


def candidate_slice(cfg: EncoderConfig, i: int) -> slice:
    """Positions of candidate ``i`` inside a state vector."""
    start = N_GLOBAL + i * cfg.slot_width
    return slice(start, start + cfg.slot_width)


class StateEncoder(TransformerMixin, BaseEstimator):
    """Transformer turning a list of contexts into a state matrix.

    The graph is a constructor parameter because state features are read
    off it; ``fit`` only validates. Use it as the first step of a
    pipeline in front of an estimator trained on state vectors.
    """

    def __init__(self, graph=None, d_embed=8, hash_seed=0, n_candidates=5):
        self.graph = graph
        self.d_embed = d_embed
        self.hash_seed = hash_seed
        self.n_candidates = n_candidates

    def _config(self) -> EncoderConfig:
        return EncoderConfig(self.d_embed, self.hash_seed, self.n_candidates)

    def fit(self, X=None, y=None):
        cfg = self._config()
        if self.graph is None:
            raise ValueError("StateEncoder needs a graph")
        self.n_features_out_ = cfg.d_state
        return self

    def transform(self, X: Sequence[CompressedContext]) -> np.ndarray:
        cfg = self._config()
        graph = self.graph if self.graph is not None else KnowledgeGraph()
        if not len(X):
            return np.empty((0, cfg.d_state))
        return np.stack([encode_state(graph, ctx, cfg) for ctx in X])
