import math
import random

import pytest

from convsearch.error import InputError
from convsearch.evaluation import (
    Qrels,
    compare,
    evaluate_run,
    intrinsic_eval,
    monotone_decreasing,
    paired_ttest,
    prf,
    ranking_metrics,
    render_json,
    render_table,
    significance_marker,
)
from convsearch.retrieval import RankedList


def _ranked(query_id, passage_ids):
    return RankedList(query_id, tuple((pid, float(-i)) for i, pid in enumerate(passage_ids)))


@pytest.mark.parametrize("predicted, gold, expected", [
    ({"a", "b"}, {"a", "c"}, (0.5, 0.5, 0.5)),
    (set(), {"a"}, (1.0, 0.0, 0.0)),
    ({"a"}, set(), (0.0, 1.0, 0.0)),
    (set(), set(), (1.0, 1.0, 1.0)),
    ({"a"}, {"a"}, (1.0, 1.0, 1.0)),
])
def test_prf_conventions(predicted, gold, expected):
    assert prf(predicted, gold) == pytest.approx(expected)


def test_intrinsic_eval_skips_first_turns():
    report = intrinsic_eval([
        ("t", 1, set(), set()),
        ("t", 2, {"a"}, {"a", "b"}),
        ("t", 3, {"a", "c"}, {"a"}),
    ])
    assert report.counts == {"first_turn": 1, "included": 2}
    assert report.means["precision"] == pytest.approx(0.75)
    assert report.means["recall"] == pytest.approx(0.75)
    assert report.per_turn[2]["f1"] == pytest.approx(2 / 3)


@pytest.fixture
def three_query_fixture():
    qrels = Qrels()
    for qid, pid, grade in [
        ("q1", "a", 2), ("q1", "c", 1),
        ("q2", "x", 1), ("q2", "y", 1),
        ("q3", "m", 0),
    ]:
        qrels.add(qid, pid, grade)
    runs = {
        "q1": _ranked("q1", ["a", "b", "c", "d"]),
        "q2": _ranked("q2", ["w", "y", "z"]),
        "q3": _ranked("q3", ["m"]),
    }
    return runs, qrels


def test_ranking_metrics_by_hand(three_query_fixture):
    runs, qrels = three_query_fixture
    q1 = ranking_metrics(runs["q1"], qrels.grades("q1"))
    idcg = 2 + 1 / math.log2(3)
    assert q1["recall"] == pytest.approx(1.0, abs=1e-9)
    assert q1["map"] == pytest.approx((1 / 1 + 2 / 3) / 2, abs=1e-9)
    assert q1["mrr"] == pytest.approx(1.0, abs=1e-9)
    assert q1["ndcg@3"] == pytest.approx((2 + 1 / math.log2(4)) / idcg, abs=1e-9)

    q2 = ranking_metrics(runs["q2"], qrels.grades("q2"))
    assert q2["recall"] == pytest.approx(0.5, abs=1e-9)
    assert q2["map"] == pytest.approx((1 / 2) / 2, abs=1e-9)
    assert q2["mrr"] == pytest.approx(0.5, abs=1e-9)
    assert q2["ndcg@3"] == pytest.approx((1 / math.log2(3)) / (1 + 1 / math.log2(3)), abs=1e-9)

    assert ranking_metrics(runs["q3"], qrels.grades("q3")) is None


def test_ranking_metrics_respects_cut():
    grades = {"c": 1}
    metrics = ranking_metrics(_ranked("q", ["a", "b", "c"]), grades, cut=2)
    assert metrics["recall"] == 0.0
    assert metrics["mrr"] == 0.0


def test_ranking_metrics_binarize_threshold():
    grades = {"a": 1, "b": 2}
    metrics = ranking_metrics(_ranked("q", ["a", "b"]), grades, binarize_at=2)
    assert metrics["mrr"] == pytest.approx(0.5)
    # NDCG keeps the graded gains: ideal order is b then a.
    assert metrics["ndcg@3"] == pytest.approx((1 + 2 / math.log2(3)) / (2 + 1 / math.log2(3)))


def test_evaluate_run_counts_exclusions(three_query_fixture):
    runs, qrels = three_query_fixture
    runs = dict(runs, unjudged=_ranked("unjudged", ["a"]))
    report = evaluate_run(runs, qrels, turn_of={"q1": 1, "q2": 2})
    assert report.counts == {"missing_qrels": 1, "no_relevant": 1, "included": 2}
    assert sorted(report.per_query) == ["q1", "q2"]
    assert report.means["recall"] == pytest.approx(0.75)
    assert report.monotone["recall"] is True


def test_evaluate_run_scores_missing_runs_as_empty(three_query_fixture):
    runs, qrels = three_query_fixture
    del runs["q2"]
    report = evaluate_run(runs, qrels)
    assert report.per_query["q2"] == {"recall": 0.0, "map": 0.0, "mrr": 0.0, "ndcg@3": 0.0}


def test_evaluate_run_agrees_with_direct_metrics():
    rng = random.Random(7)
    passages = [f"p{i}" for i in range(12)]
    qrels, runs = Qrels(), {}
    for i in range(25):
        qid = f"q{i}"
        for pid in rng.sample(passages, rng.randint(1, 6)):
            qrels.add(qid, pid, rng.randint(0, 2))
        runs[qid] = _ranked(qid, rng.sample(passages, rng.randint(0, 10)))
    report = evaluate_run(runs, qrels, cut=8)
    assert report.per_query
    for qid, values in report.per_query.items():
        expected = ranking_metrics(runs[qid], qrels.grades(qid), cut=8)
        assert sorted(values) == sorted(expected)
        for metric, value in expected.items():
            assert values[metric] == pytest.approx(value, abs=1e-9), (qid, metric)


def test_evaluate_run_keeps_list_order_for_tied_scores():
    qrels = Qrels()
    qrels.add("q", "b", 1)
    runs = {"q": RankedList("q", (("a", 1.0), ("b", 1.0)))}
    report = evaluate_run(runs, qrels)
    assert report.per_query["q"]["mrr"] == pytest.approx(0.5)
    assert report.per_query["q"]["map"] == pytest.approx(0.5)


def test_monotone_decreasing():
    assert monotone_decreasing({1: 0.5, 2: 0.4, 3: 0.4})
    assert not monotone_decreasing({1: 0.3, 2: 0.4})
    assert monotone_decreasing({})


def test_paired_ttest_hand_fixture():
    result = paired_ttest([1, 1, 1, -1], [0, 0, 0, 0])
    assert result.t == pytest.approx(1.0, abs=1e-9)
    assert result.df == 3
    assert result.defined
    assert 0.0 < result.p < 1.0


def test_paired_ttest_swap_negates_t():
    a, b = [0.3, 0.5, 0.9, 0.1, 0.4], [0.2, 0.6, 0.4, 0.0, 0.1]
    forward, backward = paired_ttest(a, b), paired_ttest(b, a)
    assert backward.t == pytest.approx(-forward.t)
    assert backward.p == pytest.approx(forward.p)


def test_paired_ttest_constant_differences_are_undefined():
    result = paired_ttest([1, 2, 3], [0, 1, 2])
    assert not result.defined
    assert result.t is None and result.p is None
    assert significance_marker(0.0, 1.0, result) == ""


def test_paired_ttest_rejects_bad_samples():
    with pytest.raises(InputError):
        paired_ttest([1, 2], [1])
    with pytest.raises(InputError):
        paired_ttest([1], [2])


def test_compare_marks_significant_gain():
    qrels = Qrels()
    baseline, system = {}, {}
    for i in range(12):
        qid = f"q{i}"
        qrels.add(qid, "rel", 1)
        baseline[qid] = _ranked(qid, ["x", "y", "rel"] if i % 2 else ["x", "y", "z", "rel"])
        system[qid] = _ranked(qid, ["rel", "x"] if i != 0 else ["x", "rel"])
    a, b = evaluate_run(baseline, qrels), evaluate_run(system, qrels)
    comparison = compare(a, b)
    assert comparison["mrr"]["marker"] == "▲"
    assert compare(b, a)["mrr"]["marker"] == "▼"
    assert comparison["mrr"]["queries"] == 12


def test_reports_render_deterministically(three_query_fixture):
    runs, qrels = three_query_fixture
    reports = []
    for reverse in (False, True):
        ordered = dict(sorted(runs.items(), reverse=reverse))
        report = evaluate_run(ordered, qrels, turn_of={"q1": 1, "q2": 2})
        report.header = {"config": {"mu": 2500.0}, "inputs": {"qrels": "abc"}}
        reports.append(report)
    assert render_json(reports[0]) == render_json(reports[1])
    assert render_table(reports[0]) == render_table(reports[1])
    table = render_table(reports[0], "demo")
    assert table.startswith("# demo\n")
    assert "# config.mu = 2500.0000" in table
    assert "turn 2" in table


def test_qrels_rejects_duplicates_and_negative_grades():
    qrels = Qrels()
    qrels.add("q", "a", 1)
    with pytest.raises(InputError):
        qrels.add("q", "a", 2)
    with pytest.raises(InputError):
        qrels.add("q", "b", -1)


def test_paired_ttest_differences_equal_up_to_rounding_are_undefined():
    result = paired_ttest([1.0, 2 / 3], [2 / 3, 1 / 3])
    assert not result.defined
    assert result.t is None and result.p is None
