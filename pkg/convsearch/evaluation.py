"""
Intrinsic and extrinsic evaluation.

Intrinsic: per-query precision, recall and F1 of predicted against gold
resolution terms, averaged over queries that are not the first turn of their
conversation.

Extrinsic: Recall, AP and RR at a depth cut with graded judgments binarized at
`binarize_at`, plus NDCG with linear gain and a 1/log2(rank + 1) discount,
computed by pytrec_eval.
Queries without any relevant passage are excluded from the means.

Means use `math.fsum`, so they do not depend on the order queries are
processed in. Reports render to JSON and to an aligned text table, both
without timestamps, so reruns are byte-identical.
"""
import math
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pytrec_eval
from scipy import stats

from convsearch.error import InputError

logger = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.01
INTRINSIC_METRICS = ("precision", "recall", "f1")


# --- Judgments ---
@dataclass
class Qrels:
    """Graded judgments: query id -> passage id -> grade (>= 0)."""
    judgments: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def add(self, query_id, passage_id, grade):
        if grade < 0:
            raise InputError(f"Negative grade for ({query_id}, {passage_id}).", query_id=query_id)
        per_query = self.judgments.setdefault(query_id, {})
        if passage_id in per_query:
            raise InputError(
                f"Duplicate judgment for ({query_id}, {passage_id}).", query_id=query_id, passage_id=passage_id
            )
        per_query[passage_id] = int(grade)

    def grades(self, query_id):
        return self.judgments.get(query_id, {})

    def relevant(self, query_id, binarize_at=1):
        return {pid for pid, grade in self.grades(query_id).items() if grade >= binarize_at}

    def __contains__(self, query_id):
        return query_id in self.judgments

    def query_ids(self):
        return sorted(self.judgments)


# --- Report ---
@dataclass
class EvalReport:
    """
    Per-query values, corpus means and per-turn means for one system.

    Attributes:
        kind (str): 'intrinsic' or 'extrinsic'.
        metrics (tuple): Metric names, in display order.
        per_query (dict): Query id -> metric -> value (included queries only).
        turn_of (dict): Query id -> turn index.
        means (dict): Metric -> arithmetic mean over per_query.
        per_turn (dict): Turn -> metric -> mean.
        counts (dict): 'included' plus one count per exclusion reason.
        monotone (dict): Metric -> whether per-turn means never increase with turn.
        header (dict): Configuration and input hashes of the producing run.
        comparison (dict): Optional significance results against a baseline.
    """
    kind: str
    metrics: tuple
    per_query: dict = field(default_factory=dict)
    turn_of: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)
    per_turn: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)
    header: dict = field(default_factory=dict)
    comparison: dict = field(default_factory=dict)

    @property
    def empty(self):
        return not self.per_query

    def values(self, metric, query_ids=None):
        query_ids = sorted(self.per_query) if query_ids is None else query_ids
        return [self.per_query[qid][metric] for qid in query_ids]

    def to_dict(self):
        return {
            "kind": self.kind,
            "metrics": list(self.metrics),
            "empty": self.empty,
            "counts": dict(sorted(self.counts.items())),
            "means": {m: self.means[m] for m in self.metrics if m in self.means},
            "per_turn": {str(turn): self.per_turn[turn] for turn in sorted(self.per_turn)},
            "monotone_decreasing": dict(sorted(self.monotone.items())),
            "per_query": {qid: self.per_query[qid] for qid in sorted(self.per_query)},
            "header": self.header,
            "comparison": self.comparison,
        }


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


def _finish(report):
    """Fills means, per-turn means and the monotone flags from per_query."""
    report.means = {m: _mean(report.values(m)) for m in report.metrics} if report.per_query else {}
    grouped = defaultdict(lambda: defaultdict(list))
    for qid in sorted(report.per_query):
        turn = report.turn_of.get(qid)
        if turn is None:
            continue
        for metric in report.metrics:
            grouped[metric][turn].append(report.per_query[qid][metric])
    report.per_turn = {}
    for metric in report.metrics:
        for turn, mean in per_turn(grouped[metric]).items():
            report.per_turn.setdefault(turn, {})[metric] = mean
    report.monotone = {
        metric: monotone_decreasing({t: v[metric] for t, v in report.per_turn.items()}) for metric in report.metrics
    }
    report.counts["included"] = len(report.per_query)
    return report


# --- Intrinsic ---
def prf(predicted, gold):
    """
    Set precision, recall and F1.

    Conventions: P = 1 when nothing is predicted, R = 1 when gold is empty,
    F1 = 0 when either P or R is 0.

    Returns:
        tuple of float: (P, R, F1).
    """
    predicted, gold = set(predicted), set(gold)
    hits = len(predicted & gold)
    precision = hits / len(predicted) if predicted else 1.0
    recall = hits / len(gold) if gold else 1.0
    if precision == 0.0 or recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def intrinsic_eval(dataset):
    """
    Micro-averaged term classification metrics.

    Args:
        dataset (iterable): (topic_id, turn, predicted terms, gold terms) tuples.

    Returns:
        EvalReport: First turns are counted under 'first_turn' and excluded.
    """
    report = EvalReport(kind="intrinsic", metrics=INTRINSIC_METRICS, counts={"first_turn": 0})
    for topic_id, turn, predicted, gold in dataset:
        if turn <= 1:
            report.counts["first_turn"] += 1
            continue
        qid = f"{topic_id}_{turn}"
        precision, recall, f1 = prf(predicted, gold)
        report.per_query[qid] = {"precision": precision, "recall": recall, "f1": f1}
        report.turn_of[qid] = turn
    if not report.per_query:
        logger.warning("Intrinsic evaluation has no non-first-turn queries.", extra=dict(report.counts))
    return _finish(report)


# --- Extrinsic ---
def ndcg_name(cut_ndcg):
    return f"ndcg@{cut_ndcg}"


def ranking_metrics(run, grades, cut_ndcg=3, cut=1000, binarize_at=1):
    """
    Recall, AP, RR and NDCG for one ranked list, computed directly in rank order.

    Args:
        run (RankedList): The system ranking.
        grades (dict): Passage id -> grade for this query.
        cut_ndcg (int): NDCG rank cutoff.
        cut (int): Depth for Recall, AP and RR.
        binarize_at (int): Minimum grade counted as relevant.

    Returns:
        dict or None: Metric -> value; None when the query has no relevant passage.
    """
    relevant = {pid for pid, grade in grades.items() if grade >= binarize_at}
    if not relevant:
        return None
    ranking = run.passage_ids()[:cut]

    hits, precision_sum, reciprocal_rank = 0, 0.0, 0.0
    for rank, pid in enumerate(ranking, start=1):
        if pid in relevant:
            hits += 1
            precision_sum += hits / rank
            if not reciprocal_rank:
                reciprocal_rank = 1.0 / rank

    dcg = math.fsum(grades.get(pid, 0) / math.log2(rank + 1) for rank, pid in enumerate(ranking[:cut_ndcg], start=1))
    ideal = sorted(grades.items(), key=lambda item: (-item[1], item[0]))[:cut_ndcg]
    idcg = math.fsum(grade / math.log2(rank + 1) for rank, (_, grade) in enumerate(ideal, start=1))

    return {
        "recall": hits / len(relevant),
        "map": precision_sum / len(relevant),
        "mrr": reciprocal_rank,
        ndcg_name(cut_ndcg): dcg / idcg if idcg > 0 else 0.0,
    }


def _trec_measures(cut_ndcg, cut):
    """trec_eval measure -> result key -> report metric name."""
    return {
        f"ndcg_cut.{cut_ndcg}": (f"ndcg_cut_{cut_ndcg}", ndcg_name(cut_ndcg)),
        f"recall.{cut}": (f"recall_{cut}", "recall"),
        f"map_cut.{cut}": (f"map_cut_{cut}", "map"),
        "recip_rank": ("recip_rank", "mrr"),
    }


def evaluate_run(runs, qrels, turn_of=None, cut_ndcg=3, cut=1000, binarize_at=1):
    """
    Extrinsic evaluation of one system's runs with pytrec_eval.

    Judged queries missing from `runs` are scored as empty rankings. Run
    queries absent from the qrels and judged queries with no relevant passage
    are excluded and counted. `ranking_metrics` computes the same values
    directly and is kept as the readable reference.

    Args:
        runs (dict): Query id -> RankedList.
        qrels (Qrels): Judgments.
        turn_of (dict, optional): Query id -> turn, for per-turn means.

    Returns:
        EvalReport: The extrinsic report.
    """
    metrics = (ndcg_name(cut_ndcg), "recall", "map", "mrr")
    report = EvalReport(
        kind="extrinsic", metrics=metrics, counts={"missing_qrels": 0, "no_relevant": 0}
    )
    judged = {}
    for qid in sorted(set(runs) | set(qrels.query_ids())):
        if qid not in qrels:
            report.counts["missing_qrels"] += 1
        elif not qrels.relevant(qid, binarize_at):
            report.counts["no_relevant"] += 1
        else:
            judged[qid] = dict(qrels.grades(qid))

    # trec_eval re-sorts by score and breaks ties on docno, so scores are -rank
    ranked = {}
    for qid in judged:
        ranking = runs[qid].passage_ids()[:cut] if qid in runs else []
        if ranking:
            ranked[qid] = {pid: float(-rank) for rank, pid in enumerate(ranking, start=1)}

    measures = _trec_measures(cut_ndcg, cut)
    scored = {}
    if ranked:
        evaluator = pytrec_eval.RelevanceEvaluator(judged, set(measures), relevance_level=binarize_at)
        scored = evaluator.evaluate(ranked)

    for qid in judged:
        values = scored.get(qid, {})  # absent: empty ranking
        report.per_query[qid] = {name: float(values.get(key, 0.0)) for key, name in measures.values()}
        if turn_of and qid in turn_of:
            report.turn_of[qid] = turn_of[qid]
    if report.counts["missing_qrels"] or report.counts["no_relevant"]:
        logger.warning("Queries excluded from ranking evaluation.", extra=dict(report.counts))
    return _finish(report)


# --- Per-Turn Analysis ---
def per_turn(values_by_turn):
    """Turn -> arithmetic mean of that turn's values (turns without values are dropped)."""
    return {turn: _mean(values) for turn, values in sorted(values_by_turn.items()) if values}


def monotone_decreasing(means_by_turn):
    """True when per-turn means never increase with the turn index. Reported, never enforced."""
    ordered = [means_by_turn[turn] for turn in sorted(means_by_turn)]
    return all(later <= earlier for earlier, later in zip(ordered, ordered[1:]))


# --- Significance ---
@dataclass(frozen=True)
class TTestResult:
    """Paired two-tailed t-test; `t` and `p` are None when the differences have no variance."""
    t: Optional[float]
    p: Optional[float]
    df: int
    defined: bool

    def to_dict(self):
        return {"t": self.t, "p": self.p, "df": self.df, "defined": self.defined}


def paired_ttest(a, b):
    """
    Paired two-tailed t-test on a - b.

    Args:
        a, b (sequence of float): Per-query values, aligned by query.

    Returns:
        TTestResult: t = mean(d) / (sd(d) / sqrt(n)) with df = n - 1 and
        p = 2 * sf(|t|). Undefined when every difference is identical.

    Raises:
        InputError: On unequal lengths or fewer than two pairs.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"Paired samples must have equal length, got {a.shape} and {b.shape}.")
    n = len(a)
    if n < 2:
        raise InputError(f"Paired t-test needs at least 2 pairs, got {n}.", n=n)
    differences = a - b
    df = n - 1
    # equal up to rounding, e.g. 1 - 2/3 against 2/3 - 1/3
    if np.allclose(differences, differences[0], rtol=1e-12, atol=1e-12):
        return TTestResult(t=None, p=None, df=df, defined=False)
    sd = float(np.std(differences, ddof=1))
    t = float(np.mean(differences)) / (sd / math.sqrt(n))
    p = float(2.0 * stats.t.sf(abs(t), df))
    return TTestResult(t=t, p=p, df=df, defined=True)


def significance_marker(mean_a, mean_b, result, alpha=SIGNIFICANCE_LEVEL):
    """'▲' for a significant gain of B over A, '▼' for a significant loss, '' otherwise."""
    if not result.defined or result.p >= alpha:
        return ""
    return "▲" if mean_b > mean_a else "▼"


def compare(report_a, report_b, metrics=None, alpha=SIGNIFICANCE_LEVEL):
    """
    Per-metric paired t-tests of B against baseline A over their common queries.

    Returns:
        dict: Metric -> {mean_a, mean_b, t, p, df, defined, marker, queries}.
    """
    metrics = metrics or report_b.metrics
    common = sorted(set(report_a.per_query) & set(report_b.per_query))
    results = {}
    for metric in metrics:
        a, b = report_a.values(metric, common), report_b.values(metric, common)
        mean_a, mean_b = _mean(a), _mean(b)
        if len(common) >= 2:
            result = paired_ttest(b, a)
        else:
            result = TTestResult(t=None, p=None, df=max(len(common) - 1, 0), defined=False)
        results[metric] = {
            "mean_a": mean_a,
            "mean_b": mean_b,
            **result.to_dict(),
            "marker": significance_marker(mean_a, mean_b, result, alpha),
            "queries": len(common),
        }
    return results


# --- Rendering ---
def render_json(report):
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _table(rows):
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]


def render_table(report, title=None):
    """Aligned-column text rendering: header, means, per-turn means, comparison."""
    lines = []
    if title:
        lines.append(f"# {title}")
    for section in sorted(report.header):
        value = report.header[section]
        if isinstance(value, dict):
            for key in sorted(value):
                lines.append(f"# {section}.{key} = {_fmt(value[key])}")
        else:
            lines.append(f"# {section} = {_fmt(value)}")
    lines.append(f"# counts = {', '.join(f'{k}:{v}' for k, v in sorted(report.counts.items()))}")
    lines.append("")

    metrics = list(report.metrics)
    rows = [["", *metrics]]
    rows.append(["all", *[_fmt(report.means.get(m)) + report.comparison.get(m, {}).get("marker", "") for m in metrics]])
    for turn in sorted(report.per_turn):
        rows.append([f"turn {turn}", *[_fmt(report.per_turn[turn].get(m)) for m in metrics]])
    lines.extend(_table(rows))
    lines.append("")
    lines.append("monotone decreasing per turn: " + ", ".join(
        f"{m}={'yes' if report.monotone.get(m) else 'no'}" for m in metrics
    ))
    if report.comparison:
        lines.append("")
        rows = [["metric", "baseline", "system", "t", "p", "sig"]]
        for metric in metrics:
            c = report.comparison.get(metric)
            if c:
                rows.append([metric, _fmt(c["mean_a"]), _fmt(c["mean_b"]), _fmt(c["t"]), _fmt(c["p"]), c["marker"] or "-"])
        lines.extend(_table(rows))
    return "\n".join(lines) + "\n"
