import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgc.contexts import AmbiguityKind, CompressedContext, sample_contexts
from kgc.errors import ReportError
from kgc.evaluation import (
    CSV_COLUMNS,
    EvalReport,
    OraclePolicy,
    RandomPolicy,
    RuleBasedPolicy,
    emit_report,
    integration_accuracy,
    point_gain,
    quality_index,
    read_report_csv,
    relative_gain,
    round_half_up,
    time_gain,
    timed_evaluate,
)
from kgc.kg import Triple, build_graph

T = [Triple(f"e{i}", "r", f"e{i + 1}") for i in range(10)]


def ctx(i, correct=0):
    cands = (T[i], T[i]._replace(tail="zz"))
    if correct is None:
        return CompressedContext(cands[1:], None, AmbiguityKind.MASKED_TAIL, T[i])
    return CompressedContext(cands, 0, AmbiguityKind.MASKED_TAIL, T[i])


class TestAccuracy:
    def test_all_correct(self):
        assert integration_accuracy([(0, ctx(0)), (0, ctx(1))]) == 1.0

    def test_all_wrong(self):
        assert integration_accuracy([(1, ctx(0)), (2, ctx(1))]) == 0.0

    def test_three_of_four(self):
        d = [(0, ctx(0)), (0, ctx(1)), (1, ctx(2, None)), (2, ctx(3))]
        assert integration_accuracy(d) == 0.75

    def test_empty(self):
        with pytest.raises(ValueError):
            integration_accuracy([])


class TestQuality:
    def test_perfect(self):
        assert quality_index(T[:3], T[:3]) == 1.0

    def test_empty_integrated(self):
        assert quality_index([], T[:3]) == 0.0

    def test_half_half(self):
        assert quality_index([T[0], T[5]], [T[0], T[1]]) == 0.5

    def test_empty_truth(self):
        with pytest.raises(ValueError):
            quality_index(T[:1], [])


@given(st.sets(st.integers(0, 30)), st.sets(st.integers(0, 30), min_size=1))
@settings(max_examples=300, deadline=None)
def test_quality_bounds_and_recall_monotone(chosen, truth):
    q = quality_index(chosen, truth)
    assert 0.0 <= q <= 1.0
    missing = sorted(truth - chosen)
    if missing:
        recall = len(chosen & truth) / len(truth)
        recall_after = len((chosen | {missing[0]}) & truth) / len(truth)
        assert recall_after >= recall


class TestTimedEvaluate:
    graph = build_graph([Triple("e0", "q", "e5")])

    def test_single_correct(self):
        contexts = [ctx(0)]
        r = timed_evaluate(OraclePolicy(), contexts, self.graph, ground_truth=T[:4])
        assert r.accuracy == 1.0
        # P = 1, R = 1/4
        assert r.quality_index == pytest.approx(2 * 0.25 / 1.25)
        assert r.decisions == 1 and r.wall_seconds >= 0.0

    def test_perfect_policy_is_recall_limited(self):
        # two of five sources only ever appear as distractor-only contexts
        contexts = [ctx(0), ctx(1), ctx(2), ctx(3, None), ctx(4, None)]
        r = timed_evaluate(OraclePolicy(), contexts, self.graph)
        assert r.accuracy == 1.0
        assert r.quality_index == pytest.approx(2 * 0.6 / 1.6, abs=1e-12)

    def test_graph_not_mutated(self):
        before = self.graph.copy()
        timed_evaluate(OraclePolicy(), [ctx(i) for i in range(5)], self.graph)
        assert self.graph == before

    def test_wrong_picks_cost_precision(self):
        class Wrong(RandomPolicy):
            name = "wrong"

            def __call__(self, graph, c):
                return 1

        r = timed_evaluate(Wrong(), [ctx(i) for i in range(4)], self.graph)
        assert r.accuracy == 0.0 and r.quality_index == 0.0

    def test_correct_insertions_visible_to_policy(self):
        seen = []

        class Probe(OraclePolicy):
            def __call__(self, graph, c):
                seen.append(len(graph))
                return super().__call__(graph, c)

        timed_evaluate(Probe(), [ctx(i) for i in range(3)], self.graph)
        assert seen == [1, 2, 3]

    def test_random_policy_rate(self, synth_split):
        contexts = sample_contexts(synth_split, 6000, 5, 16, 0.0, 0)
        r = timed_evaluate(RandomPolicy(0), contexts, synth_split.train_graph)
        assert abs(r.accuracy - 1 / 6) <= 0.02

    def test_repeatable(self, synth_split):
        contexts = sample_contexts(synth_split, 500, 5, 16, 0.2, 1)
        a = timed_evaluate(RandomPolicy(3), contexts, synth_split.train_graph, repeat=2)
        b = timed_evaluate(RandomPolicy(3), contexts, synth_split.train_graph)
        assert (a.accuracy, a.quality_index) == (b.accuracy, b.quality_index)
        r1 = timed_evaluate(RuleBasedPolicy(), contexts, synth_split.train_graph)
        r2 = timed_evaluate(RuleBasedPolicy(), contexts, synth_split.train_graph)
        assert (r1.accuracy, r1.quality_index) == (r2.accuracy, r2.quality_index)

    def test_no_contexts(self):
        with pytest.raises(ValueError):
            timed_evaluate(OraclePolicy(), [], self.graph)


class TestRounding:
    @pytest.mark.parametrize("x, expected", [(0.05, 0.1), (0.15, 0.2), (2.25, 2.3), (-0.05, -0.1), (28.571, 28.6)])
    def test_half_up(self, x, expected):
        assert round_half_up(x) == expected

    def test_gains(self):
        assert relative_gain(0.95, 0.80) == 18.8
        assert relative_gain(0.95, 0.85) == 11.8
        assert point_gain(0.95, 0.80) == 15.0
        assert point_gain(0.95, 0.85) == 10.0
        assert relative_gain(0.9, 0.7) == 28.6
        assert relative_gain(0.9, 0.75) == 20.0
        assert time_gain(40.0, 60.0) == 33.3
        assert relative_gain(1.0, 0.0) is None and time_gain(1.0, 0.0) is None


def reports(acc=(0.80, 0.85, 0.95), quality=(0.7, 0.75, 0.9), seconds=(60.0, 50.0, 40.0)):
    names = ("rule-based", "supervised", "dqn")
    return [EvalReport(n, a, s, q, 1000) for n, a, q, s in zip(names, acc, quality, seconds)]


class TestEmitReport:
    def test_csv_columns(self):
        _, csv_text = emit_report(reports())
        rows = read_report_csv(csv_text)
        assert tuple(rows[0]) == CSV_COLUMNS
        assert CSV_COLUMNS[:6] == ("policy", "accuracy", "wall_seconds", "quality_index",
                                   "improvement_over_rule_based_pct", "improvement_over_supervised_pct")
        assert [r["policy"] for r in rows] == ["rule-based", "supervised", "dqn"]

    def test_reference_arithmetic(self):
        _, csv_text = emit_report(reports())
        dqn = read_report_csv(csv_text)[2]
        assert float(dqn["accuracy_gain_over_rule_based_pp"]) == 15.0
        assert float(dqn["accuracy_gain_over_supervised_pp"]) == 10.0
        assert float(dqn["improvement_over_rule_based_pct"]) == 18.8
        assert float(dqn["improvement_over_supervised_pct"]) == 11.8
        assert float(dqn["quality_gain_over_rule_based_pct"]) == 28.6
        assert float(dqn["quality_gain_over_supervised_pct"]) == 20.0

    def test_text_tables(self):
        text, _ = emit_report(reports())
        for title in ("Integration accuracy", "Integration time", "KG quality index (F1)"):
            assert title in text
        dqn_line = next(line for line in text.splitlines() if line.startswith("dqn") and "%" in line)
        assert "95.0%" in dqn_line and "15.0" in dqn_line and "18.8%" in dqn_line

    def test_missing_baseline(self):
        with pytest.raises(ReportError):
            emit_report(reports()[1:])

    def test_without_improvements(self):
        _, csv_text = emit_report(reports()[2:], improvements=False)
        row = read_report_csv(csv_text)[0]
        assert row["improvement_over_rule_based_pct"] == ""

    def test_empty(self):
        with pytest.raises(ReportError):
            emit_report([])
