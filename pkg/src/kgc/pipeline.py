"""Prepare / train / compare steps shared by the CLI and the test-suite.

All artifacts live in ``cfg.output_dir``:

``train.tsv`` ``holdout.tsv`` ``eval_contexts.tsv`` ``manifest.json``
``config.resolved`` (prepare); ``qnet.ckpt`` ``training_log.csv`` (train);
``linmodel.ckpt`` ``report.csv`` ``report.txt`` (compare).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import TrainingLog, train
from .baselines import LinearModel, fit_supervised
from .config import RunConfig
from .contexts import (
    CompressedContext,
    Episode,
    HoldoutSplit,
    cycle_episodes,
    dump_contexts,
    load_contexts,
    sample_contexts,
    split_holdout,
)
from .encoding import encode_state
from .env import IntegrationEnv
from .errors import ConfigError
from .evaluation import (
    EvalReport,
    RandomPolicy,
    RuleBasedPolicy,
    dqn_policy,
    emit_report,
    supervised_policy,
    timed_evaluate,
)
from .kg import build_graph, load_triples, write_triples
from .qnet import QNetwork, init_network, load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

SUPERVISED_SEED_OFFSET = 1_000_003
EVAL_SEED_OFFSET = 2_000_003
GREEDY_WINDOW = 500

TRAIN_TSV = "train.tsv"
HOLDOUT_TSV = "holdout.tsv"
EVAL_CONTEXTS = "eval_contexts.tsv"
MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved"
QNET_CKPT = "qnet.ckpt"
TRAINING_LOG = "training_log.csv"
LINMODEL_CKPT = "linmodel.ckpt"
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"


class MissingArtifact(ConfigError):
    """A step ran before the step producing its inputs."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"{path} not found; run `kgc {producer}` first")
    return path


@dataclass
class Prepared:
    split: HoldoutSplit
    fit: HoldoutSplit
    eval: HoldoutSplit
    manifest: dict


def prepare(cfg: RunConfig) -> dict:
    """Split the dataset, generate evaluation contexts, write the manifest."""
    src = Path(cfg.dataset_path)
    if not cfg.dataset_path or not src.is_file():
        raise ConfigError(f"dataset not found: {cfg.dataset_path!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = load_triples(src)
    graph = build_graph(raw)
    split = split_holdout(graph, cfg.holdout_fraction, cfg.seed)
    fit, ev = split.partition(cfg.eval.fraction)
    write_triples(out / TRAIN_TSV, sorted(split.train_graph.triples))
    write_triples(out / HOLDOUT_TSV, split.holdout)

    n_eval = 0
    if ev.holdout:
        M = min(cfg.M, len(ev.holdout))
        ctxs = sample_contexts(ev, cfg.eval.n_contexts, cfg.K, M, cfg.distractor_prob, cfg.seed + EVAL_SEED_OFFSET)
        n_eval = len(ctxs)
        dump_contexts([Episode((c,)) for c in ctxs], out / EVAL_CONTEXTS)
    else:
        (out / EVAL_CONTEXTS).write_text("", encoding="utf-8")
    (out / RESOLVED_CONFIG).write_text(cfg.to_text(), encoding="utf-8")

    ents, rels = graph.sorted_vocabulary()
    manifest = {
        "seed": cfg.seed,
        "dataset_path": str(src),
        "input_lines": len(raw),
        "input_triples": len(graph),
        "train_triples": len(split.train_graph),
        "holdout_triples": len(split.holdout),
        "fit_holdout": len(fit.holdout),
        "eval_holdout": len(ev.holdout),
        "eval_contexts": n_eval,
        "entities": len(ents),
        "relations": len(rels),
        "K": cfg.K,
        "M": cfg.M,
        "d_state": cfg.encoder_config.d_state,
        "sha256": {
            name: _sha256(out / name) for name in (TRAIN_TSV, HOLDOUT_TSV, EVAL_CONTEXTS)
        },
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_prepared(cfg: RunConfig) -> Prepared:
    out = Path(cfg.output_dir)
    manifest = json.loads(_require(out / MANIFEST, "prepare").read_text(encoding="utf-8"))
    train_graph = build_graph(load_triples(_require(out / TRAIN_TSV, "prepare")))
    holdout = load_triples(_require(out / HOLDOUT_TSV, "prepare"))
    split = HoldoutSplit(train_graph, holdout, manifest["seed"])
    cut = manifest["fit_holdout"]
    return Prepared(split, split.subset(holdout[:cut]), split.subset(holdout[cut:]), manifest)


def make_env(cfg: RunConfig, prep: Prepared) -> IntegrationEnv:
    fit = prep.fit
    if not fit.holdout:
        raise ConfigError("no held-out triples left for training; lower eval.fraction")
    M = min(cfg.M, len(fit.holdout))
    episodes = cycle_episodes(fit, cfg.K, M, cfg.distractor_prob, cfg.seed)
    return IntegrationEnv(fit.train_graph, cfg.encoder_config, episodes)


def train_agent(cfg: RunConfig) -> tuple[QNetwork, TrainingLog]:
    prep = load_prepared(cfg)
    out = Path(cfg.output_dir)
    agent_cfg = cfg.agent_config()
    net = init_network(cfg.layer_dims(), agent_cfg.seed)
    env = make_env(cfg, prep)
    net, training_log = train(lambda: env, agent_cfg, net)
    save_checkpoint(net, out / QNET_CKPT)
    training_log.to_csv(out / TRAINING_LOG)
    (out / RESOLVED_CONFIG).write_text(cfg.to_text(), encoding="utf-8")
    return net, training_log


def supervised_examples(cfg: RunConfig, prep: Prepared) -> tuple[np.ndarray, np.ndarray]:
    """Labelled states from the training slice, encoded against the training graph."""
    fit = prep.fit
    M = min(cfg.M, len(fit.holdout))
    n = cfg.baseline.passes * len(fit.holdout)
    ctxs = sample_contexts(fit, n, cfg.K, M, cfg.distractor_prob, cfg.seed + SUPERVISED_SEED_OFFSET)
    enc = cfg.encoder_config
    X = np.stack([encode_state(fit.train_graph, c, enc) for c in ctxs])
    y = np.array([c.correct_action for c in ctxs])
    return X, y


def fit_baseline(cfg: RunConfig, prep: Prepared) -> LinearModel:
    X, y = supervised_examples(cfg, prep)
    return fit_supervised(X, y, cfg.K + 1, cfg.baseline.epochs, cfg.baseline.learning_rate, cfg.seed)


def eval_contexts(cfg: RunConfig) -> list[CompressedContext]:
    path = _require(Path(cfg.output_dir) / EVAL_CONTEXTS, "prepare")
    ctxs = [c for ep in load_contexts(path) for c in ep]
    if not ctxs:
        raise ConfigError("no evaluation contexts; raise eval.fraction and re-run prepare")
    return ctxs


def compare(cfg: RunConfig, net: QNetwork | None = None) -> tuple[list[EvalReport], str, str]:
    """Evaluate random, rule-based, supervised and DQN policies on the evaluation contexts."""
    out = Path(cfg.output_dir)
    if net is None:
        net = load_checkpoint(_require(out / QNET_CKPT, "train"))
    if net.layer_dims[0] != cfg.encoder_config.d_state or net.n_outputs != cfg.K + 1:
        raise ConfigError(f"checkpoint dims {net.layer_dims} do not match the configuration")
    prep = load_prepared(cfg)
    ctxs = eval_contexts(cfg)
    model = fit_baseline(cfg, prep)
    model.save(out / LINMODEL_CKPT)
    enc = cfg.encoder_config
    policies = [
        RandomPolicy(cfg.seed),
        RuleBasedPolicy(),
        supervised_policy(model, enc),
        dqn_policy(net, enc),
    ]
    graph = prep.split.train_graph
    reports = [timed_evaluate(p, ctxs, graph, seed=cfg.seed, repeat=cfg.eval.repeat) for p in policies]
    text, csv_text = emit_report(reports)
    (out / REPORT_CSV).write_text(csv_text, encoding="utf-8")
    (out / REPORT_TXT).write_text(text, encoding="utf-8")
    return reports, text, csv_text
