"""Scoring decision policies on held-out contexts and formatting comparison tables."""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Sequence

import numpy as np

from .agent import greedy_action
from .baselines import LinearModel, rule_based_choose, supervised_choose
from .contexts import CompressedContext
from .encoding import EncoderConfig, encode_state
from .errors import ReportError
from .kg import KnowledgeGraph, Triple
from .qnet import QNetwork, forward

RULE_BASED = "rule-based"
SUPERVISED = "supervised"


# -- policies ---------------------------------------------------------------------

class Policy:
    """A named decision rule ``(working_graph, context) -> action``."""

    name = "policy"

    def __call__(self, graph: KnowledgeGraph, ctx: CompressedContext) -> int:
        raise NotImplementedError


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def __call__(self, graph, ctx):
        return int(self._rng.integers(ctx.K + 1))


class RuleBasedPolicy(Policy):
    name = RULE_BASED

    def __call__(self, graph, ctx):
        return rule_based_choose(graph, ctx)


class OraclePolicy(Policy):
    """Always takes the right decision; an upper bound for the metrics."""

    name = "oracle"

    def __call__(self, graph, ctx):
        return ctx.correct_action


class StatePolicy(Policy):
    """Encodes the state, then applies ``choose(state) -> action``."""

    def __init__(self, name: str, choose: Callable[[np.ndarray], int], encoder: EncoderConfig):
        self.name = name
        self.choose = choose
        self.encoder = encoder

    def __call__(self, graph, ctx):
        return int(self.choose(encode_state(graph, ctx, self.encoder)))


def dqn_policy(net: QNetwork, encoder: EncoderConfig, name: str = "dqn") -> StatePolicy:
    return StatePolicy(name, lambda s: greedy_action(forward(net, s)), encoder)


def supervised_policy(model: LinearModel, encoder: EncoderConfig, name: str = SUPERVISED) -> StatePolicy:
    return StatePolicy(name, lambda s: supervised_choose(model, s), encoder)


def estimator_policy(name: str, estimator, encoder: EncoderConfig) -> StatePolicy:
    """Wrap any fitted estimator exposing ``predict`` on state matrices."""
    return StatePolicy(name, lambda s: int(estimator.predict(s[None, :])[0]), encoder)


# -- metrics ---------------------------------------------------------------------

def is_correct(action: int, ctx: CompressedContext) -> bool:
    return action == ctx.correct_action


def integration_accuracy(decisions: Sequence[tuple[int, CompressedContext]]) -> float:
    if not decisions:
        raise ValueError("no decisions to score")
    return sum(is_correct(a, ctx) for a, ctx in decisions) / len(decisions)


def quality_index(integrated: Iterable[Triple], ground_truth: Iterable[Triple]) -> float:
    """F1 of integrated triples against the held-out ground truth."""
    integrated = set(integrated)
    truth = set(ground_truth)
    if not truth:
        raise ValueError("ground truth must be non-empty")
    hits = len(integrated & truth)
    precision = hits / len(integrated) if integrated else 0.0
    recall = hits / len(truth)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class EvalReport:
    policy_name: str
    accuracy: float
    wall_seconds: float
    quality_index: float
    decisions: int
    seed: int = 0


def _run_once(policy, contexts, graph) -> tuple[list[int], set[Triple], float]:
    working = graph.copy()
    actions: list[int] = []
    chosen: set[Triple] = set()
    elapsed = 0.0
    clock = time.perf_counter
    for ctx in contexts:
        t0 = clock()
        a = int(policy(working, ctx))
        if a != ctx.K:
            if a == ctx.correct_index:
                working.insert(ctx.candidates[a])
            chosen.add(ctx.candidates[a])
        elapsed += clock() - t0
        actions.append(a)
    return actions, chosen, elapsed


def timed_evaluate(
    policy: Policy,
    contexts: Sequence[CompressedContext],
    graph: KnowledgeGraph,
    ground_truth: Iterable[Triple] | None = None,
    seed: int = 0,
    repeat: int = 1,
) -> EvalReport:
    """Run ``policy`` over ``contexts`` against a fresh copy of ``graph``.

    Correct selections are inserted into the working graph; wrong ones are
    recorded (they count against precision) but not inserted. Only decision
    and insertion time is clocked. With ``repeat > 1`` the run is repeated
    and the median time reported. ``ground_truth`` defaults to the source
    triples of ``contexts``.
    """
    if not contexts:
        raise ValueError("no contexts to evaluate")
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    truth = set(ground_truth) if ground_truth is not None else {c.source for c in contexts}
    times = []
    for _ in range(repeat):
        if hasattr(policy, "reset"):
            policy.reset()
        actions, chosen, elapsed = _run_once(policy, contexts, graph)
        times.append(elapsed)
    return EvalReport(
        policy_name=policy.name,
        accuracy=integration_accuracy(list(zip(actions, contexts))),
        wall_seconds=statistics.median(times),
        quality_index=quality_index(chosen, truth),
        decisions=len(actions),
        seed=seed,
    )


# -- reporting -------------------------------------------------------------------

def _dec(x: float) -> Decimal:
    # the shortest repr, so 0.95 is the decimal 0.95 and not its binary neighbour
    return Decimal(repr(float(x)))


def _round(d: Decimal, places: int = 1) -> float:
    return float(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def round_half_up(x: float, places: int = 1) -> float:
    return _round(_dec(x), places)


def relative_gain(x: float, base: float) -> float | None:
    """``(x - base) / base * 100``, rounded half-up to one decimal."""
    if base == 0:
        return None
    return _round((_dec(x) - _dec(base)) / _dec(base) * 100)


def point_gain(x: float, base: float) -> float:
    """Difference of two fractions in percentage points."""
    return _round((_dec(x) - _dec(base)) * 100)


def time_gain(seconds: float, base_seconds: float) -> float | None:
    """Percentage of baseline time saved."""
    if base_seconds == 0:
        return None
    return _round((_dec(base_seconds) - _dec(seconds)) / _dec(base_seconds) * 100)


CSV_COLUMNS = (
    "policy",
    "accuracy",
    "wall_seconds",
    "quality_index",
    "improvement_over_rule_based_pct",
    "improvement_over_supervised_pct",
    "accuracy_gain_over_rule_based_pp",
    "accuracy_gain_over_supervised_pp",
    "time_gain_over_rule_based_pct",
    "time_gain_over_supervised_pct",
    "quality_gain_over_rule_based_pct",
    "quality_gain_over_supervised_pct",
)


def report_rows(reports: Sequence[EvalReport], rule_based: str = RULE_BASED,
                supervised: str = SUPERVISED, improvements: bool = True) -> list[dict]:
    if not reports:
        raise ReportError("no reports to emit")
    by_name = {r.policy_name: r for r in reports}
    bases = {}
    if improvements:
        for key, name in (("rule_based", rule_based), ("supervised", supervised)):
            if name not in by_name:
                raise ReportError(f"baseline {name!r} missing from reports")
            bases[key] = by_name[name]
    rows = []
    for r in reports:
        row = {"policy": r.policy_name, "accuracy": r.accuracy,
               "wall_seconds": r.wall_seconds, "quality_index": r.quality_index}
        for key, base in bases.items():
            row[f"improvement_over_{key}_pct"] = relative_gain(r.accuracy, base.accuracy)
            row[f"accuracy_gain_over_{key}_pp"] = point_gain(r.accuracy, base.accuracy)
            row[f"time_gain_over_{key}_pct"] = time_gain(r.wall_seconds, base.wall_seconds)
            row[f"quality_gain_over_{key}_pct"] = relative_gain(r.quality_index, base.quality_index)
        rows.append(row)
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table(title: str, header: Sequence[str], body: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    line = "-+-".join("-" * w for w in widths)
    fmt = lambda cells: " | ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([title, fmt(header), line, *(fmt(r) for r in body)])


def _opt(v, suffix="") -> str:
    return "-" if v is None else f"{v:.1f}{suffix}"


def emit_report(
    reports: Sequence[EvalReport],
    rule_based: str = RULE_BASED,
    supervised: str = SUPERVISED,
    improvements: bool = True,
) -> tuple[str, str]:
    """Return ``(text_tables, csv_text)``.

    Accuracy gains are given both in percentage points ("pp") and
    relative ("rel"). Timing gains are the share of baseline time saved.
    Quality gains are relative.
    """
    rows = report_rows(reports, rule_based, supervised, improvements)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in CSV_COLUMNS])

    g = lambda row, key: row.get(key) if improvements else None
    acc = _table(
        "Integration accuracy",
        ["policy", "accuracy", "pp vs rule", "pp vs sup", "rel vs rule", "rel vs sup"],
        [[r["policy"], f"{r['accuracy'] * 100:.1f}%",
          _opt(g(r, "accuracy_gain_over_rule_based_pp")), _opt(g(r, "accuracy_gain_over_supervised_pp")),
          _opt(g(r, "improvement_over_rule_based_pct"), "%"), _opt(g(r, "improvement_over_supervised_pct"), "%")]
         for r in rows],
    )
    eff = _table(
        "Integration time",
        ["policy", "seconds", "gain vs rule", "gain vs sup"],
        [[r["policy"], f"{r['wall_seconds']:.4f}",
          _opt(g(r, "time_gain_over_rule_based_pct"), "%"), _opt(g(r, "time_gain_over_supervised_pct"), "%")]
         for r in rows],
    )
    qual = _table(
        "KG quality index (F1)",
        ["policy", "quality", "rel vs rule", "rel vs sup"],
        [[r["policy"], f"{r['quality_index']:.3f}",
          _opt(g(r, "quality_gain_over_rule_based_pct"), "%"), _opt(g(r, "quality_gain_over_supervised_pct"), "%")]
         for r in rows],
    )
    return "\n\n".join([acc, eff, qual]) + "\n", buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def report_to_dict(report: EvalReport) -> dict:
    return asdict(report)
