"""Context-integration environment.

Each step presents one pending context. Actions ``0..K-1`` insert the
corresponding candidate, action ``K`` rejects the context. Wrong
candidates are scored but never inserted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .contexts import CompressedContext, Episode
from .encoding import EncoderConfig, encode_state
from .errors import EnvStateError
from .kg import InsertOutcome, KnowledgeGraph, Triple

REWARD_CORRECT = 1.0
REWARD_WRONG = -1.0
REWARD_MISSED = -0.2  # rejected a context that did hold the truth
REWARD_REJECT_JUNK = 0.5


def action_count(K: int) -> int:
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    return K + 1


def reward_for(ctx: CompressedContext, action: int) -> float:
    K = ctx.K
    if not 0 <= action <= K:
        raise ValueError(f"action {action} out of range for K={K}")
    if action == K:
        return REWARD_MISSED if ctx.correct_index is not None else REWARD_REJECT_JUNK
    return REWARD_CORRECT if action == ctx.correct_index else REWARD_WRONG


class Transition(NamedTuple):
    next_state: np.ndarray
    reward: float
    done: bool


@dataclass
class Tally:
    correct: int = 0
    incorrect: int = 0
    reject: int = 0
    correct_reject: int = 0

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.reject


class IntegrationEnv:
    """Environment over a fixed training graph.

    ``episodes`` is an optional iterable consulted by :meth:`reset` when it
    is called without an explicit episode; training loops pass an endless
    supply (see :func:`kgc.contexts.cycle_episodes`).
    """

    def __init__(
        self,
        train_graph: KnowledgeGraph,
        encoder: EncoderConfig,
        episodes: Iterable[Episode] | None = None,
        record_trace: bool = False,
    ):
        self.train_graph = train_graph
        self.encoder = encoder
        self._supply: Iterator[Episode] | None = iter(episodes) if episodes is not None else None
        self.working_graph = train_graph.copy()
        self._inserted: list[Triple] = []
        self.episode: Episode | None = None
        self.cursor = 0
        self.tally = Tally()
        self.n_episodes = 0
        self.trace: list[tuple[int, int, int, float, bool]] | None = [] if record_trace else None

    @property
    def K(self) -> int:
        return self.encoder.K

    @property
    def n_actions(self) -> int:
        return action_count(self.K)

    @property
    def d_state(self) -> int:
        return self.encoder.d_state

    @property
    def done(self) -> bool:
        return self.episode is None or self.cursor >= len(self.episode)

    @property
    def current_context(self) -> CompressedContext:
        if self.done:
            raise EnvStateError("no pending context")
        return self.episode.contexts[self.cursor]

    def correct_action(self) -> int:
        return self.current_context.correct_action

    def reset(self, episode: Episode | None = None) -> np.ndarray:
        if episode is None:
            if self._supply is None:
                raise ValueError("reset() needs an episode when no supply is configured")
            try:
                episode = next(self._supply)
            except StopIteration:
                raise EnvStateError("episode supply exhausted") from None
        if not episode.contexts:
            raise ValueError("empty episode")
        for ctx in episode.contexts:
            if ctx.K != self.K:
                raise ValueError(f"episode context has K={ctx.K}, environment expects {self.K}")
        # undo the previous episode's insertions instead of recopying the graph
        for t in reversed(self._inserted):
            self.working_graph.remove(t)
        self._inserted.clear()
        self.episode = episode
        self.cursor = 0
        self.tally = Tally()
        self.n_episodes += 1
        return encode_state(self.working_graph, episode.contexts[0], self.encoder)

    def step(self, action: int) -> Transition:
        if self.done:
            raise EnvStateError("step() called on a finished episode; call reset()")
        ctx = self.episode.contexts[self.cursor]
        action = int(action)
        reward = reward_for(ctx, action)
        if action == ctx.K:
            self.tally.reject += 1
            if ctx.correct_index is None:
                self.tally.correct_reject += 1
        elif action == ctx.correct_index:
            self.tally.correct += 1
            if self.working_graph.insert(ctx.candidates[action]) is InsertOutcome.INSERTED:
                self._inserted.append(ctx.candidates[action])
        else:
            self.tally.incorrect += 1
        self.cursor += 1
        done = self.cursor >= len(self.episode)
        if done:
            next_state = np.zeros(self.d_state)
        else:
            next_state = encode_state(self.working_graph, self.episode.contexts[self.cursor], self.encoder)
        if self.trace is not None:
            self.trace.append((self.n_episodes - 1, self.cursor, action, reward, done))
        return Transition(next_state, reward, done)

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "cursor", "action", "reward", "done"])
            w.writerows(self.trace or [])


def reset(env: IntegrationEnv, episode: Episode) -> np.ndarray:
    return env.reset(episode)


def step(env: IntegrationEnv, action: int) -> Transition:
    return env.step(action)
