"""Deep Q-learning agent and the tabular Q-learning reference."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Hashable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .env import IntegrationEnv
from .qnet import (
    QNetwork,
    TargetParams,
    apply_gradients,
    batch_loss_and_gradient,
    forward,
    init_network,
    sync_target,
)

PROBE_SIZE = 512


class Experience(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 25_000
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_sync_interval: int = 250
    total_steps: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        for name in ("epsilon_decay_steps", "batch_size", "buffer_capacity", "target_sync_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.total_steps < 0 or self.seed < 0:
            raise ValueError("total_steps and seed must be non-negative")

    @classmethod
    def with_defaults_for(cls, total_steps: int, **overrides) -> "AgentConfig":
        """Config whose epsilon decays over the first half of ``total_steps``."""
        overrides.setdefault("epsilon_decay_steps", max(1, total_steps // 2))
        return cls(total_steps=total_steps, **overrides)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# -- policy -----------------------------------------------------------------------

def greedy_action(q_values) -> int:
    """Argmax, ties resolved to the lowest index."""
    return int(np.argmax(q_values))


def select_action(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice.

    Always consumes one uniform draw, plus one integer draw when exploring.
    """
    q = np.asarray(q_values)
    if q.size == 0:
        raise ValueError("q_values must be non-empty")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return greedy_action(q)


def epsilon_at(step: int, cfg: AgentConfig) -> float:
    if step >= cfg.epsilon_decay_steps:
        return cfg.epsilon_end
    frac = step / cfg.epsilon_decay_steps
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)


# -- replay -----------------------------------------------------------------------

class ReplayBuffer:
    """Fixed-capacity FIFO ring of experiences stored as parallel arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.write_cursor = 0
        self.size = 0
        self._s = self._s_next = None
        self._a = np.zeros(capacity, dtype=np.intp)
        self._r = np.zeros(capacity)
        self._done = np.zeros(capacity, dtype=bool)

    def __len__(self) -> int:
        return self.size

    def push(self, e: Experience) -> None:
        s = np.asarray(e.s, dtype=np.float64)
        if self._s is None:
            self._s = np.zeros((self.capacity, s.size))
            self._s_next = np.zeros((self.capacity, s.size))
        elif s.size != self._s.shape[1] or np.size(e.s_next) != self._s.shape[1]:
            raise ValueError("experience state dimension changed")
        if not math.isfinite(e.r):
            raise ValueError("reward must be finite")
        i = self.write_cursor
        self._s[i] = s
        self._s_next[i] = e.s_next
        self._a[i] = e.a
        self._r[i] = e.r
        self._done[i] = e.done
        self.write_cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _get(self, i: int) -> Experience:
        return Experience(self._s[i].copy(), int(self._a[i]), float(self._r[i]),
                          self._s_next[i].copy(), bool(self._done[i]))

    def items(self) -> list[Experience]:
        """Contents from oldest to newest."""
        start = self.write_cursor if self.size == self.capacity else 0
        return [self._get((start + k) % self.capacity) for k in range(self.size)]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray | None:
        """Uniform draw with replacement over stored slots; None until ``batch_size`` items exist."""
        if self.size < batch_size:
            return None
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience] | None:
        idx = self.sample_indices(batch_size, rng)
        if idx is None:
            return None
        return [self._get(int(i)) for i in idx]

    def arrays(self, idx) -> tuple[np.ndarray, ...]:
        return self._s[idx], self._a[idx], self._r[idx], self._s_next[idx], self._done[idx]


def push(buffer: ReplayBuffer, e: Experience) -> None:
    buffer.push(e)


def sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> list[Experience] | None:
    return buffer.sample(batch_size, rng)


# -- Bellman targets -------------------------------------------------------------

def td_target(e: Experience, gamma: float, target: TargetParams) -> float:
    if e.done:
        return float(e.r)
    return float(e.r + gamma * np.max(forward(target, e.s_next)))


def td_targets(rewards, next_states, dones, gamma: float, target: TargetParams) -> np.ndarray:
    """Vectorised :func:`td_target` over a batch."""
    future = np.max(forward(target, next_states), axis=1)
    return np.where(dones, rewards, rewards + gamma * future)


class TabularQ:
    """Sparse Q-table with default value 0.

    With ``n_actions`` set, the max over a state ranges over all actions
    (unvisited ones count as 0); otherwise over the actions recorded for it.
    """

    def __init__(self, n_actions: int | None = None):
        self.n_actions = n_actions
        self.table: dict[Hashable, dict[int, float]] = {}

    def get(self, s: Hashable, a: int) -> float:
        return self.table.get(s, {}).get(a, 0.0)

    def max_value(self, s: Hashable) -> float:
        row = self.table.get(s)
        if not row:
            return 0.0
        best = max(row.values())
        if self.n_actions is not None and len(row) < self.n_actions:
            best = max(best, 0.0)
        return best

    def set(self, s: Hashable, a: int, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError("Q-values must stay finite")
        self.table.setdefault(s, {})[a] = value


def tabular_update(q: TabularQ, e: Experience, alpha: float, gamma: float) -> None:
    """``Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))``; the future term is 0 when done."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    future = 0.0 if e.done else q.max_value(e.s_next)
    old = q.get(e.s, e.a)
    q.set(e.s, e.a, old + alpha * (e.r + gamma * future - old))


# -- training ---------------------------------------------------------------------

@dataclass
class TrainingLog:
    steps: list[int] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    episode_returns: list[float] = field(default_factory=list)
    # whether the greedy action at each step was the right decision
    greedy_correct: list[bool] = field(default_factory=list)
    # mean squared TD error on a frozen probe batch, recorded at each target sync
    sync_residuals: list[float] = field(default_factory=list)

    COLUMNS = ("step", "epsilon", "reward", "loss", "episode_return", "greedy_correct")

    def __len__(self) -> int:
        return len(self.steps)

    def greedy_accuracy(self, last: int | None = None) -> float:
        window = self.greedy_correct if last is None else self.greedy_correct[-last:]
        return float(np.mean(window)) if window else float("nan")

    def rows(self):
        return zip(self.steps, self.epsilons, self.rewards, self.losses, self.episode_returns,
                   self.greedy_correct)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for step, eps, r, loss, ret, ok in self.rows():
                w.writerow([step, repr(eps), repr(r), repr(loss), repr(ret), int(ok)])


def read_training_log(path: str | Path) -> TrainingLog:
    log = TrainingLog()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TrainingLog.COLUMNS:
            raise ValueError(f"{path}: not a training log")
        for row in reader:
            log.steps.append(int(row[0]))
            log.epsilons.append(float(row[1]))
            log.rewards.append(float(row[2]))
            log.losses.append(float(row[3]))
            log.episode_returns.append(float(row[4]))
            log.greedy_correct.append(row[5] == "1")
    return log


def _probe_residual(net: QNetwork, target: TargetParams, probe, gamma: float) -> float:
    s, a, r, s_next, done = probe
    y = td_targets(r, s_next, done, gamma, target)
    q = forward(net, s)[np.arange(len(a)), a]
    return float(np.mean((y - q) ** 2))


def train(
    env_factory: Callable[[], IntegrationEnv],
    cfg: AgentConfig,
    net: QNetwork,
) -> tuple[QNetwork, TrainingLog]:
    """Run ``cfg.total_steps`` environment steps of deep Q-learning.

    Per step: epsilon-greedy action on ``forward(net, s)``, environment
    step, push to replay; once the buffer holds ``batch_size`` items, one
    SGD step on the batch-mean squared TD error against the target
    parameters. Target parameters are re-synced every
    ``target_sync_interval`` steps. ``net`` is updated in place.

    One generator seeded with ``cfg.seed`` drives exploration and replay
    sampling, in that order within each step.
    """
    log = TrainingLog()
    if cfg.total_steps == 0:
        return net, log
    env = env_factory()
    if net.n_outputs != env.n_actions or net.n_inputs != env.d_state:
        raise ValueError(
            f"network dims {net.layer_dims} do not fit env (d_state={env.d_state}, actions={env.n_actions})"
        )
    rng = np.random.default_rng(cfg.seed)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    target = sync_target(net)
    probe = None
    s = env.reset()
    episode_return = 0.0
    for step in range(cfg.total_steps):
        eps = epsilon_at(step, cfg)
        q = forward(net, s)
        log.greedy_correct.append(greedy_action(q) == env.correct_action())
        a = select_action(q, eps, rng)
        s_next, r, done = env.step(a)
        buffer.push(Experience(s, a, r, s_next, done))

        loss = float("nan")
        idx = buffer.sample_indices(cfg.batch_size, rng)
        if idx is not None:
            bs, ba, br, bs_next, bdone = buffer.arrays(idx)
            y = td_targets(br, bs_next, bdone, cfg.gamma, target)
            loss, grads = batch_loss_and_gradient(net, bs, ba, y)
            apply_gradients(net, grads, cfg.learning_rate)

        episode_return += r
        log.steps.append(step)
        log.epsilons.append(eps)
        log.rewards.append(r)
        log.losses.append(loss)
        log.episode_returns.append(episode_return)

        if (step + 1) % cfg.target_sync_interval == 0:
            target = sync_target(net)
            if probe is None:
                keep = np.arange(min(len(buffer), PROBE_SIZE))
                probe = tuple(arr.copy() for arr in buffer.arrays(keep))
            log.sync_residuals.append(_probe_residual(net, target, probe, cfg.gamma))

        if done:
            s = env.reset()
            episode_return = 0.0
        else:
            s = s_next
    return net, log


class DQNIntegrator(BaseEstimator):
    """Estimator wrapper around :func:`train`.

    ``fit`` takes an :class:`~kgc.env.IntegrationEnv` (or a zero-argument
    factory returning one) whose ``reset()`` draws episodes from its own
    supply. After fitting, ``decision_function`` returns Q-values and
    ``predict`` the greedy actions for a matrix of state vectors.
    """

    def __init__(
        self,
        hidden_layers=(64, 64),
        gamma=0.99,
        learning_rate=1e-3,
        epsilon_start=1.0,
        epsilon_end=0.05,
        epsilon_decay_steps=None,
        batch_size=32,
        buffer_capacity=10_000,
        target_sync_interval=250,
        total_steps=50_000,
        random_state=0,
    ):
        self.hidden_layers = hidden_layers
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.epsilon_start = epsilon_start
        self.epsilon_end = epsilon_end
        self.epsilon_decay_steps = epsilon_decay_steps
        self.batch_size = batch_size
        self.buffer_capacity = buffer_capacity
        self.target_sync_interval = target_sync_interval
        self.total_steps = total_steps
        self.random_state = random_state

    def agent_config(self) -> AgentConfig:
        decay = self.epsilon_decay_steps or max(1, self.total_steps // 2)
        return AgentConfig(
            gamma=self.gamma,
            learning_rate=self.learning_rate,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay_steps=decay,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            target_sync_interval=self.target_sync_interval,
            total_steps=self.total_steps,
            seed=self.random_state,
        )

    def fit(self, env, y=None, init_net: QNetwork | None = None):
        factory = env if callable(env) and not isinstance(env, IntegrationEnv) else (lambda: env)
        probe_env = factory()
        dims = [probe_env.d_state, *self.hidden_layers, probe_env.n_actions]
        net = init_net.copy() if init_net is not None else init_network(dims, self.random_state)
        self.network_, self.log_ = train(lambda: probe_env, self.agent_config(), net)
        self.target_ = sync_target(self.network_)
        self.n_features_in_ = net.n_inputs
        return self

    @classmethod
    def from_network(cls, net: QNetwork, **params) -> "DQNIntegrator":
        est = cls(**params)
        est.network_ = net
        est.target_ = sync_target(net)
        est.n_features_in_ = net.n_inputs
        return est

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64, ensure_2d=False)
        return forward(self.network_, X)

    def predict(self, X) -> np.ndarray:
        q = self.decision_function(X)
        return np.argmax(q, axis=-1)
