"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` or
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgc import pipeline
from kgc.agent import Experience, ReplayBuffer
from kgc.config import parse_config
from kgc.contexts import make_context, sample_contexts, split_holdout
from kgc.evaluation import (
    EvalReport,
    OraclePolicy,
    RandomPolicy,
    emit_report,
    integration_accuracy,
    quality_index,
    read_report_csv,
    timed_evaluate,
)
from kgc.kg import Triple, build_graph, write_triples
from kgc.qnet import apply_gradients, init_network, loss_and_gradient, sync_target
from kgc.synthetic import make_synthetic_graph

sys.path.insert(0, str(Path(__file__).parent))
from oracles import (  # noqa: E402
    CHAIN_ACTIONS,
    GOAL,
    bandit_run,
    gradient_probe_counted,
    network_sweeps,
    network_table,
    tabular_sweeps,
    value_iteration,
)


def verdict(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")
    assert ok, detail


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_gradient_oracle(capsys):
    rng = np.random.default_rng(2024)
    dims_choices = ([8, 16, 4], [12, 8, 8, 3])
    t0 = time.perf_counter()
    results = [gradient_probe_counted(rng, dims_choices[int(rng.integers(2))]) for _ in range(100)]
    elapsed = time.perf_counter() - t0
    worst = max(err for err, _ in results)
    redrawn = sum(n for _, n in results)
    ok = worst < 1e-4 and elapsed < 10.0
    verdict(capsys, 1, "analytic vs central-difference gradients", ok,
            f"max rel err {worst:.2e} over 100 probes (< 1e-4), {redrawn} near-kink draws replaced, "
            f"{elapsed:.2f}s (< 10s)")


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2_bellman_oracle(capsys):
    gamma, alpha, lr = 0.9, 0.5, 0.05
    t0 = time.perf_counter()
    q_star = value_iteration(gamma)
    q, sweeps = tabular_sweeps(gamma, alpha, q_star, tol=1e-6, max_sweeps=100_000)
    table = np.array([[q.get(s, a) for a in range(CHAIN_ACTIONS)] for s in range(GOAL)])
    tab_err = float(np.max(np.abs(table - q_star)))
    gaps = []
    for n in (sweeps, 2 * sweeps, 5 * sweeps):
        q_n, _ = tabular_sweeps(gamma, alpha, q_star, tol=-1.0, max_sweeps=n)
        table_n = np.array([[q_n.get(s, a) for a in range(CHAIN_ACTIONS)] for s in range(GOAL)])
        gaps.append(float(np.max(np.abs(network_table(network_sweeps(gamma, lr, n)) - table_n))))
    elapsed = time.perf_counter() - t0
    ok = tab_err <= 1e-6 and sweeps <= 100_000 and max(gaps) < 0.05 and elapsed < 30.0
    verdict(capsys, 2, "tabular update reaches value iteration; network tracks it", ok,
            f"tabular err {tab_err:.1e} after {sweeps} sweeps, network gap {max(gaps):.4f} (< 0.05), "
            f"{elapsed:.1f}s")


# -- 3 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bandit_split():
    return split_holdout(build_graph(make_synthetic_graph(200, 20, 1000, seed=0)), 0.2, 0)


def test_criterion_3_bandit(capsys, bandit_split):
    t0 = time.perf_counter()
    _, log = bandit_run(bandit_split, K=5, seed=0, total_steps=5000, learning_rate=1e-2, batch_size=64)
    acc = log.greedy_accuracy(500)
    contexts = sample_contexts(bandit_split, 6000, 5, 1, 0.0, 1)
    rand = timed_evaluate(RandomPolicy(0), contexts, bandit_split.train_graph).accuracy
    elapsed = time.perf_counter() - t0
    ok = acc >= 0.9 and abs(rand - 1 / 6) <= 0.02 and elapsed < 120.0
    verdict(capsys, 3, "DQN learns the contextual bandit", ok,
            f"greedy accuracy {acc:.3f} over last 500 (>= 0.9), random {rand:.3f} (1/6 +- 0.02), {elapsed:.1f}s")


# -- 4, 5: one default-configuration run ------------------------------------------

def default_config(data: Path, out: Path, **overrides):
    text = f"dataset_path = {data}\noutput_dir = {out}\n"
    return parse_config(text, {k: str(v) for k, v in overrides.items()})


@pytest.fixture(scope="module")
def synthetic_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synthetic.tsv"
    write_triples(path, make_synthetic_graph(seed=0))
    return path


@pytest.fixture(scope="module")
def default_run(tmp_path_factory, synthetic_dataset):
    cfg = default_config(synthetic_dataset, tmp_path_factory.mktemp("default-run"))
    t0 = time.perf_counter()
    pipeline.prepare(cfg)
    net, _ = pipeline.train_agent(cfg)
    reports, text, _ = pipeline.compare(cfg, net)
    return cfg, {r.policy_name: r for r in reports}, time.perf_counter() - t0


def test_criterion_4_accuracy_ordering(capsys, default_run):
    cfg, by_name, elapsed = default_run
    dqn, sup, rule = (by_name[n].accuracy for n in ("dqn", "supervised", "rule-based"))
    margin = (dqn - rule) * 100
    n = by_name["dqn"].decisions
    ok = dqn >= sup >= rule and margin >= 5.0 and n == 1000 and cfg.distractor_prob == 0.2 and elapsed < 300
    verdict(capsys, 4, "accuracy ordering DQN >= supervised >= rule-based", ok,
            f"dqn {dqn:.3f}, supervised {sup:.3f}, rule-based {rule:.3f}, "
            f"margin {margin:.1f}pp (>= 5) on {n} contexts, {elapsed:.0f}s")


def test_criterion_5_quality_ordering(capsys, default_run):
    cfg, by_name, _ = default_run
    contexts = pipeline.eval_contexts(cfg)
    graph = pipeline.load_prepared(cfg).split.train_graph
    oracle = timed_evaluate(OraclePolicy(), contexts, graph).quality_index
    # hand oracle: the perfect policy inserts exactly the truths it is shown,
    # so precision is 1 and recall is the share of sources offered with their truth
    truth = {c.source for c in contexts}
    offered = {c.source for c in contexts if c.correct_index is not None}
    recall = len(offered) / len(truth)
    expected = 2 * recall / (1 + recall)
    dqn_q, rule_q = by_name["dqn"].quality_index, by_name["rule-based"].quality_index
    ok = dqn_q >= rule_q and abs(oracle - expected) < 1e-12
    verdict(capsys, 5, "quality ordering and perfect-policy F1", ok,
            f"dqn {dqn_q:.3f} >= rule-based {rule_q:.3f}; perfect {oracle:.6f} == 2R/(1+R) {expected:.6f} "
            f"(R = {len(offered)}/{len(truth)})")


# -- 6 ---------------------------------------------------------------------------

def test_criterion_6_table_arithmetic(capsys):
    reports = [
        EvalReport("rule-based", 0.80, 60.0, 0.70, 1),
        EvalReport("supervised", 0.85, 50.0, 0.75, 1),
        EvalReport("dqn", 0.95, 40.0, 0.90, 1),
    ]
    _, csv_text = emit_report(reports)
    dqn = read_report_csv(csv_text)[2]
    pp = (float(dqn["accuracy_gain_over_rule_based_pp"]), float(dqn["accuracy_gain_over_supervised_pp"]))
    rel = (float(dqn["quality_gain_over_rule_based_pct"]), float(dqn["quality_gain_over_supervised_pct"]))
    ok = pp == (15.0, 10.0) and abs(rel[0] - 28.6) <= 0.05 and abs(rel[1] - 20.0) <= 0.05
    verdict(capsys, 6, "published table arithmetic", ok,
            f"accuracy gaps {pp[0]:g}pp / {pp[1]:g}pp, quality gains {rel[0]:g}% / {rel[1]:g}%")


# -- 7 ---------------------------------------------------------------------------

METRIC_COLUMNS = (
    "policy", "accuracy", "quality_index",
    "improvement_over_rule_based_pct", "improvement_over_supervised_pct",
    "accuracy_gain_over_rule_based_pp", "accuracy_gain_over_supervised_pp",
    "quality_gain_over_rule_based_pct", "quality_gain_over_supervised_pct",
)


def test_criterion_7_determinism(capsys, tmp_path, synthetic_dataset):
    outputs = []
    for run in ("first", "second"):
        cfg = default_config(synthetic_dataset, tmp_path / run, **{"agent.total_steps": 3000})
        pipeline.prepare(cfg)
        pipeline.train_agent(cfg)
        pipeline.compare(cfg)
        out = tmp_path / run
        rows = read_report_csv((out / pipeline.REPORT_CSV).read_text())
        outputs.append({
            "checkpoint": (out / pipeline.QNET_CKPT).read_bytes(),
            "training log": (out / pipeline.TRAINING_LOG).read_bytes(),
            "linear model": (out / pipeline.LINMODEL_CKPT).read_bytes(),
            "contexts": (out / pipeline.EVAL_CONTEXTS).read_bytes(),
            "metrics": [[r[c] for c in METRIC_COLUMNS] for r in rows],
        })
    differing = [k for k in outputs[0] if outputs[0][k] != outputs[1][k]]
    verdict(capsys, 7, "two identical prepare+train+compare runs agree", not differing,
            "checkpoints, training logs and metric columns byte-identical" if not differing
            else f"differs: {', '.join(differing)}")


# -- 8 ---------------------------------------------------------------------------

PROPERTY_CASES = 1000

_small_tokens = st.sampled_from(list("abcdefgh"))
_small_triples = st.builds(Triple, _small_tokens, st.sampled_from(["r", "s", "t"]), _small_tokens)
_LEAK_GRAPH = build_graph(make_synthetic_graph(60, 12, 300, n_communities=12, relation_skew=1.0, seed=1))
_LEAK_SPLIT = split_holdout(_LEAK_GRAPH, 0.3, 1)


@given(st.integers(1, 16), st.lists(st.integers(-10**6, 10**6), max_size=50))
@settings(max_examples=PROPERTY_CASES, deadline=None, database=None)
def prop_replay_fifo(capacity, rewards):
    buf = ReplayBuffer(capacity)
    for r in rewards:
        buf.push(Experience(np.zeros(2), 0, float(r), np.zeros(2), False))
    kept = rewards[-capacity:] if rewards else []
    assert len(buf) == len(kept)
    assert [e.r for e in buf.items()] == [float(r) for r in kept]


@given(st.integers(0, 2**32), st.integers(1, 6))
@settings(max_examples=PROPERTY_CASES, deadline=None, database=None)
def prop_target_isolation(seed, n_updates):
    rng = np.random.default_rng(seed)
    net = init_network([4, 5, 3], seed)
    target = sync_target(net)
    frozen = target.copy()
    for _ in range(n_updates):
        _, g = loss_and_gradient(net, rng.normal(size=4), int(rng.integers(3)), float(rng.normal(0, 5)))
        apply_gradients(net, g, 0.1)
    assert target.parameters_equal(frozen)


@given(st.lists(_small_triples, max_size=25), st.lists(_small_triples, max_size=10))
@settings(max_examples=PROPERTY_CASES, deadline=None, database=None)
def prop_index_consistency(initial, inserted):
    g = build_graph(initial)
    for t in inserted:
        g.insert(t)
    assert g.triples == set(initial) | set(inserted)
    assert g.check_indices()


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.booleans())
@settings(max_examples=PROPERTY_CASES, deadline=None, database=None)
def prop_no_leak(seed, K, distractor):
    truth = _LEAK_SPLIT.holdout[seed % len(_LEAK_SPLIT.holdout)]
    ctx = make_context(truth, _LEAK_SPLIT.train_graph, K, distractor, np.random.default_rng(seed))
    assert not any(c in _LEAK_SPLIT.train_graph for c in ctx.candidates)


@given(st.lists(st.tuples(st.integers(0, 3), st.booleans()), min_size=1, max_size=30),
       st.sets(st.integers(0, 40)), st.sets(st.integers(0, 40), min_size=1))
@settings(max_examples=PROPERTY_CASES, deadline=None, database=None)
def prop_metric_bounds(decisions, chosen, truth):
    from kgc.contexts import AmbiguityKind, CompressedContext

    base = Triple("h", "r", "t")
    cands = tuple(base._replace(tail=f"t{i}") for i in range(3))
    ctx_true = CompressedContext(cands, 0, AmbiguityKind.MASKED_TAIL, cands[0])
    ctx_junk = CompressedContext(cands, None, AmbiguityKind.MASKED_TAIL, base)
    acc = integration_accuracy([(a, ctx_true if has_truth else ctx_junk) for a, has_truth in decisions])
    assert 0.0 <= acc <= 1.0
    assert 0.0 <= quality_index(chosen, truth) <= 1.0


PROPERTIES = {
    "replay FIFO": prop_replay_fifo,
    "target-sync isolation": prop_target_isolation,
    "index consistency": prop_index_consistency,
    "no-leak contexts": prop_no_leak,
    "accuracy/quality in [0,1]": prop_metric_bounds,
}


def test_criterion_8_invariants(capsys):
    t0 = time.perf_counter()
    failed = []
    for name, prop in PROPERTIES.items():
        try:
            prop()
        except Exception as exc:  # report every suite before failing
            failed.append(f"{name}: {type(exc).__name__}")
    elapsed = time.perf_counter() - t0
    ok = not failed and elapsed < 60.0
    verdict(capsys, 8, "invariant property suites", ok,
            f"{len(PROPERTIES)} suites x {PROPERTY_CASES} cases, {elapsed:.1f}s (< 60s)"
            + (f"; failed {', '.join(failed)}" if failed else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
