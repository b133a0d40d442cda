"""Independent reference computations shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from kgc.agent import Experience, TabularQ, tabular_update
from kgc.qnet import QNetwork, apply_gradients, forward, init_network, loss_and_gradient

# Relative errors use this floor in the denominator so parameters with a
# (near) zero gradient are compared absolutely.
REL_FLOOR = 1e-6


def numeric_gradient(net: QNetwork, s, a: int, y: float, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``(y - Q(s,a))**2`` over every parameter, in ``GradientSet.flat`` order."""
    def loss() -> float:
        return float((y - forward(net, s)[a]) ** 2)

    out = []
    for w, b in zip(net.weights, net.biases):
        for arr in (w, b):
            flat = arr.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = loss()
                flat[i] = old - h
                down = loss()
                flat[i] = old
                out.append((up - down) / (2 * h))
    return np.array(out)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


# Central differences are only a valid reference where the loss is smooth
# within +-h of every parameter; probes with a hidden pre-activation this
# close to the ReLU kink are redrawn.
KINK_MARGIN = 1e-3


def near_kink(net: QNetwork, s) -> bool:
    x = np.asarray(s, dtype=np.float64)
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = w @ x + b
        if np.min(np.abs(z)) < KINK_MARGIN:
            return True
        x = np.maximum(z, 0.0)
    return False


def draw_probe(rng: np.random.Generator, dims) -> tuple[QNetwork, np.ndarray, int, float, int]:
    """Random (net, state, action, target); also returns how many draws were rejected."""
    rejected = 0
    while True:
        net = init_network(dims, int(rng.integers(2**63)))
        for b in net.biases:
            b[:] = rng.normal(0, 0.1, b.shape)
        s = rng.normal(size=dims[0])
        if not near_kink(net, s):
            return net, s, int(rng.integers(dims[-1])), float(rng.normal()), rejected
        rejected += 1


def gradient_probe(rng: np.random.Generator, dims) -> float:
    return gradient_probe_counted(rng, dims)[0]


def gradient_probe_counted(rng: np.random.Generator, dims) -> tuple[float, int]:
    net, s, a, y, rejected = draw_probe(rng, dims)
    _, grads = loss_and_gradient(net, s, a, y)
    return max_relative_error(grads.flat(), numeric_gradient(net, s, a, y)), rejected


# -- 5-state deterministic chain ---------------------------------------------------
# States 0..4, state 4 terminal. Action 0 moves left (floored at 0), action 1
# moves right. Entering state 4 pays 1 and ends the episode; every other
# transition pays -0.1 so both actions have distinct, non-trivial values.

CHAIN_STATES = 5
CHAIN_ACTIONS = 2
GOAL = CHAIN_STATES - 1


def chain_step(s: int, a: int) -> tuple[int, float, bool]:
    nxt = max(s - 1, 0) if a == 0 else s + 1
    if nxt == GOAL:
        return nxt, 1.0, True
    return nxt, -0.1, False


def chain_transitions() -> list[tuple[int, int, float, int, bool]]:
    out = []
    for s in range(GOAL):
        for a in range(CHAIN_ACTIONS):
            nxt, r, done = chain_step(s, a)
            out.append((s, a, r, nxt, done))
    return out


def value_iteration(gamma: float, tol: float = 1e-14) -> np.ndarray:
    q = np.zeros((GOAL, CHAIN_ACTIONS))
    while True:
        new = np.empty_like(q)
        for s, a, r, nxt, done in chain_transitions():
            new[s, a] = r + (0.0 if done else gamma * q[nxt].max())
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def tabular_sweeps(gamma: float, alpha: float, q_star: np.ndarray, tol: float = 1e-6,
                   max_sweeps: int = 100_000) -> tuple[TabularQ, int]:
    q = TabularQ(CHAIN_ACTIONS)
    for sweep in range(1, max_sweeps + 1):
        for s, a, r, nxt, done in chain_transitions():
            tabular_update(q, Experience(s, a, r, nxt, done), alpha, gamma)
        table = np.array([[q.get(s, a) for a in range(CHAIN_ACTIONS)] for s in range(GOAL)])
        if np.max(np.abs(table - q_star)) <= tol:
            return q, sweep
    return q, max_sweeps


def one_hot(s: int) -> np.ndarray:
    v = np.zeros(CHAIN_STATES)
    v[s] = 1.0
    return v


def network_sweeps(gamma: float, learning_rate: float, sweeps: int, seed: int = 0) -> QNetwork:
    """Memorising network on one-hot states, batch size 1, same sweep order as the table."""
    width = CHAIN_STATES * CHAIN_ACTIONS
    net = init_network([CHAIN_STATES, width, CHAIN_ACTIONS], seed)
    for _ in range(sweeps):
        for s, a, r, nxt, done in chain_transitions():
            y = r if done else r + gamma * float(np.max(forward(net, one_hot(nxt))))
            _, g = loss_and_gradient(net, one_hot(s), a, y)
            apply_gradients(net, g, learning_rate)
    return net


def network_table(net: QNetwork) -> np.ndarray:
    return np.array([forward(net, one_hot(s)) for s in range(GOAL)])


def bandit_run(split, K: int, seed: int = 0, total_steps: int = 5000, hidden=(64,),
               learning_rate: float = 1e-3, batch_size: int = 32):
    """Contextual-bandit sanity task: one context per episode, no distractors, gamma 0."""
    from kgc.agent import AgentConfig, train
    from kgc.contexts import cycle_episodes
    from kgc.encoding import EncoderConfig
    from kgc.env import IntegrationEnv

    enc = EncoderConfig(K=K)
    env = IntegrationEnv(split.train_graph, enc, cycle_episodes(split, K, 1, 0.0, seed))
    cfg = AgentConfig.with_defaults_for(total_steps, gamma=0.0, learning_rate=learning_rate,
                                         batch_size=batch_size, seed=seed)
    net = init_network([enc.d_state, *hidden, K + 1], seed)
    return train(lambda: env, cfg, net)
