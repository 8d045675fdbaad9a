"""
End-to-end orchestration shared by the CLI commands.

A resolver variant turns every turn of every topic into a `Resolution` (the
weighted query used for retrieval plus the history terms it added). The
remaining stages are the same for every variant:

    resolve -> search (QL) -> rerank (scorer) -> fuse (RRF over initial and
    reranked) -> evaluate

Variants:
    quretec               trained term classifier
    original:<v>          current turn plus earlier turns (cur, cur+prev, cur+first, all)
    rm3:<v>               RM3 feedback on top of original:<v>
    oracle                the gold rewrite
    distant               the distant-supervision label of the turn
"""
import os
import logging
from dataclasses import dataclass, field

from convsearch import evaluation
from convsearch.error import ConfigurationError, InputError
from convsearch.rerank_fusion import SCORERS, rerank, rrf_fuse
from convsearch.resolver import (
    ORIGINAL_VARIANTS, baseline_original, distant_label_baseline, predict_with_scores, resolution_terms_of, resolve
)
from convsearch.retrieval import ResolvedQuery, build_index, rm3_expand, search_many
from convsearch.supervision import LabelingSummary, gold_resolution_terms, history_texts, label_topic
from convsearch.trec_io import read_jsonl, write_jsonl, write_run
from utils.files import atomic_directory, input_hashes, write_text

logger = logging.getLogger(__name__)

STAGES = ("initial", "reranked", "fused")
HEADER_EXCLUDED_SETTINGS = ("output_dir",)


@dataclass(frozen=True)
class Resolution:
    topic_id: str
    turn: int
    variant: str
    query: ResolvedQuery
    expansion: frozenset = frozenset()
    scores: dict = field(default_factory=dict)

    @property
    def query_id(self):
        return f"{self.topic_id}_{self.turn}"

    def to_json(self):
        return {
            "query_id": self.query_id,
            "topic_id": self.topic_id,
            "turn": self.turn,
            "variant": self.variant,
            "expansion": sorted(self.expansion),
            "weights": {t: self.query.weights[t] for t in sorted(self.query.weights)},
            "scores": {t: self.scores[t] for t in sorted(self.scores)},
        }

    @classmethod
    def from_json(cls, record):
        try:
            query_id = f"{record['topic_id']}_{record['turn']}"
            return cls(
                topic_id=str(record["topic_id"]),
                turn=int(record["turn"]),
                variant=str(record.get("variant", "")),
                query=ResolvedQuery({str(t): float(w) for t, w in record["weights"].items()}, query_id),
                expansion=frozenset(record.get("expansion", [])),
                scores={str(t): float(s) for t, s in record.get("scores", {}).items()},
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise InputError(f"Malformed resolved query record: {e}") from e


def variant_slug(variant):
    """File-system friendly name of a variant ('original:cur+prev' -> 'original-cur+prev')."""
    return variant.replace(":", "-")


# --- Labeling ---
def label_topics(topics, mode, passages=None, config=None):
    """
    Labels every topic and logs skipped turns by reason.

    Returns:
        LabelingSummary: Examples ordered by (topic file order, turn).
    """
    summary = LabelingSummary()
    for topic in topics:
        label_topic(
            topic, mode, passages,
            window=config.window if config else 50,
            max_len=config.max_len if config else 256,
            include_answers=config.history_answers if config else False,
            summary=summary,
        )
    skipped = {reason: count for reason, count in summary.skipped.items() if reason != "first_turn"}
    if skipped:
        logger.warning("Skipped turns while labeling.", extra={'mode': mode, **skipped})
    logger.info("Labeled topics.", extra={'mode': mode, 'examples': len(summary.examples),
                                          'first_turns': summary.skipped.get("first_turn", 0)})
    return summary


# --- Resolution ---
def _needs(variant, model, index, passages):
    if variant == "quretec" and model is None:
        raise ConfigurationError("Variant 'quretec' needs a trained model (setting 'model').", variant=variant)
    if variant.startswith("rm3:") and index is None:
        raise ConfigurationError(f"Variant '{variant}' needs an index.", variant=variant)
    if variant == "distant" and passages is None:
        raise ConfigurationError("Variant 'distant' needs the corpus.", variant=variant)


def resolve_turn(variant, topic, turn_index, config, model=None, index=None, passages=None):
    """
    Resolves one turn with the given variant.

    Returns:
        Resolution: The query for retrieval and the history terms it added.
    """
    turn = topic.turn(turn_index)
    query_id = topic.query_id(turn_index)
    history = history_texts(topic, turn_index, config.history_answers)
    scores = {}

    if variant == "quretec":
        expansion, scores = predict_with_scores(model, topic, turn_index, config.tau, config.history_answers)
        query = resolve(turn.query, expansion, query_id)
    elif variant.startswith("original:") or variant.startswith("rm3:"):
        kind, base_variant = variant.split(":", 1)
        if base_variant not in ORIGINAL_VARIANTS:
            raise ConfigurationError(f"Unknown resolver variant '{variant}'.", variant=variant)
        query = baseline_original(base_variant, topic, turn_index)
        if kind == "rm3":
            query = rm3_expand(index, query, config.rm3_n, config.rm3_k, config.rm3_lambda, config.mu)
        expansion = resolution_terms_of(query.terms(), history, turn.query)
    elif variant == "oracle":
        if turn.gold_rewrite:
            query = ResolvedQuery.from_text(turn.gold_rewrite, query_id)
            expansion = gold_resolution_terms(turn.gold_rewrite, history, turn.query)
        else:
            query, expansion = resolve(turn.query, (), query_id), frozenset()
    elif variant == "distant":
        expansion = distant_label_baseline(topic, turn_index, passages, config.window, config.history_answers)
        query = resolve(turn.query, expansion, query_id)
    else:
        raise ConfigurationError(f"Unknown resolver variant '{variant}'.", variant=variant)

    return Resolution(topic.topic_id, turn_index, variant, query, frozenset(expansion), scores)


def resolve_topics(topics, variant, config, model=None, index=None, passages=None):
    """Resolutions for every turn of every topic, in (topic, turn) order."""
    _needs(variant, model, index, passages)
    resolutions = [
        resolve_turn(variant, topic, turn.turn_index, config, model, index, passages)
        for topic in topics for turn in topic.turns
    ]
    logger.info("Resolved queries.", extra={'variant': variant, 'queries': len(resolutions)})
    return resolutions


def write_resolutions(path, resolutions):
    return write_jsonl(path, (resolution.to_json() for resolution in resolutions))


def read_resolutions(path):
    resolutions = []
    for line_number, record in read_jsonl(path):
        try:
            resolutions.append(Resolution.from_json(record))
        except InputError as e:
            raise InputError(f"{path}:{line_number}: {e}", path=path, line=line_number) from e
    return resolutions


# --- Retrieval, Reranking, Fusion ---
def retrieve(index, resolutions, config):
    """query id -> initial RankedList."""
    queries = [resolution.query for resolution in resolutions]
    ranked = search_many(index, queries, config.depth, config.mu, config.workers)
    return {resolution.query_id: result for resolution, result in zip(resolutions, ranked)}


def make_scorer(config, index):
    return SCORERS[config.scorer](index, config.mu)


def rerank_runs(initial_runs, resolutions, passages, scorer):
    """query id -> reranked RankedList."""
    queries = {resolution.query_id: resolution.query for resolution in resolutions}
    reranked = {}
    for query_id in sorted(initial_runs):
        if query_id not in queries:
            raise InputError(f"No resolved query for run entry '{query_id}'.", query_id=query_id)
        reranked[query_id] = rerank(scorer, initial_runs[query_id], queries[query_id], passages)
    return reranked


def fuse_runs(runs_list, k):
    """Fuses, per query, the lists of every run; the first run defines the passages."""
    fused = {}
    for query_id in sorted(runs_list[0]):
        lists = [runs[query_id] for runs in runs_list if query_id in runs]
        fused[query_id] = rrf_fuse(lists, k)
    return fused


# --- Evaluation ---
def intrinsic_dataset(topics, resolutions, include_answers=False):
    """
    (topic_id, turn, predicted, gold) for every turn with a gold rewrite.

    Turns without a rewrite cannot be scored intrinsically and are left out.
    """
    by_id = {resolution.query_id: resolution for resolution in resolutions}
    dataset = []
    for topic in topics:
        for turn in topic.turns:
            resolution = by_id.get(topic.query_id(turn.turn_index))
            if resolution is None or not turn.gold_rewrite:
                continue
            history = history_texts(topic, turn.turn_index, include_answers)
            gold = gold_resolution_terms(turn.gold_rewrite, history, turn.query)
            dataset.append((topic.topic_id, turn.turn_index, resolution.expansion, gold))
    return dataset


def turn_index_of(topics):
    return {topic.query_id(turn.turn_index): turn.turn_index for topic in topics for turn in topic.turns}


def report_header(config, inputs, variant=None, stage=None):
    """Configuration and input hashes embedded in every report (no timestamps)."""
    settings = {k: v for k, v in config.as_dict().items() if k not in HEADER_EXCLUDED_SETTINGS}
    header = {"config": settings, "inputs": input_hashes(inputs)}
    if variant:
        header["variant"] = variant
    if stage:
        header["stage"] = stage
    return header


def extrinsic_report(runs, qrels, topics, config):
    return evaluation.evaluate_run(
        runs, qrels, turn_index_of(topics), config.ndcg_cut, config.depth, config.binarize_at
    )


def write_report(directory, name, report, title):
    write_text(os.path.join(directory, f"{name}.json"), evaluation.render_json(report))
    write_text(os.path.join(directory, f"{name}.txt"), evaluation.render_table(report, title))


# --- Full Pipeline ---
def run_variant(variant, topics, index, passages, qrels, config, model=None):
    """
    Runs every stage for one variant.

    Returns:
        dict: resolutions, runs per stage, extrinsic reports per stage and the
        intrinsic report (None when no turn has a gold rewrite).
    """
    resolutions = resolve_topics(topics, variant, config, model, index, passages)
    initial = retrieve(index, resolutions, config)
    reranked = rerank_runs(initial, resolutions, passages, make_scorer(config, index))
    fused = fuse_runs([initial, reranked], config.k_rrf)
    runs = {"initial": initial, "reranked": reranked, "fused": fused}

    reports = {stage: extrinsic_report(runs[stage], qrels, topics, config) for stage in STAGES} if qrels else {}
    dataset = intrinsic_dataset(topics, resolutions, config.history_answers)
    intrinsic = evaluation.intrinsic_eval(dataset) if dataset else None
    return {"resolutions": resolutions, "runs": runs, "reports": reports, "intrinsic": intrinsic}


def run_pipeline(config, topics, corpus, qrels, model=None, index=None, inputs=None):
    """
    index -> resolve -> search -> rerank -> fuse -> eval for every configured variant.

    Output layout under `config.output_dir` (replaced atomically):

        <variant>/resolved.jsonl
        <variant>/<stage>.run                 stage in initial, reranked, fused
        <variant>/<stage>.report.{json,txt}
        <variant>/intrinsic.report.{json,txt}
        comparison.txt                        every variant against the first

    Args:
        config (PipelineConfig): Settings; `variants` lists the variants,
            the first being the comparison baseline.
        topics (list of Topic): Conversations.
        corpus (list of Passage): Collection.
        qrels (Qrels or None): Judgments; without them no extrinsic reports.
        model (ResolverModel, optional): Needed by 'quretec'.
        index (InvertedIndex, optional): Prebuilt index; built from `corpus` otherwise.
        inputs (dict, optional): Setting key -> input path, hashed into headers.

    Returns:
        dict: variant -> result of `run_variant`.
    """
    variants = config.variant_list()
    passages = {passage.id: passage.text for passage in corpus}
    index = index if index is not None else build_index(corpus, config.workers)
    inputs = inputs or {}

    results = {variant: run_variant(variant, topics, index, passages, qrels, config, model) for variant in variants}
    baseline = variants[0]

    with atomic_directory(config.output_dir) as out_dir:
        comparison_lines = []
        for variant in variants:
            result = results[variant]
            variant_dir = os.path.join(out_dir, variant_slug(variant))
            os.makedirs(variant_dir, exist_ok=True)
            write_resolutions(os.path.join(variant_dir, "resolved.jsonl"), result["resolutions"])
            for stage in STAGES:
                write_run(os.path.join(variant_dir, f"{stage}.run"), result["runs"][stage].values(),
                          tag=f"{variant_slug(variant)}-{stage}")
                report = result["reports"].get(stage)
                if report is None:
                    continue
                report.header = report_header(config, inputs, variant, stage)
                if variant != baseline:
                    report.comparison = evaluation.compare(results[baseline]["reports"][stage], report)
                write_report(variant_dir, f"{stage}.report", report, f"{variant} ({stage})")
                comparison_lines.append(_comparison_line(variant, stage, report))
            if result["intrinsic"] is not None:
                intrinsic = result["intrinsic"]
                intrinsic.header = report_header(config, inputs, variant, "intrinsic")
                if variant != baseline and results[baseline]["intrinsic"] is not None:
                    intrinsic.comparison = evaluation.compare(results[baseline]["intrinsic"], intrinsic)
                write_report(variant_dir, "intrinsic.report", intrinsic, f"{variant} (intrinsic)")
        if comparison_lines:
            header = f"# baseline = {baseline}\n"
            write_text(os.path.join(out_dir, "comparison.txt"), header + "\n".join(comparison_lines) + "\n")

    logger.info("Pipeline finished.", extra={'variants': variants, 'output_dir': config.output_dir})
    return results


def _comparison_line(variant, stage, report):
    cells = []
    for metric in report.metrics:
        mean = report.means.get(metric)
        marker = report.comparison.get(metric, {}).get("marker", "")
        cells.append(f"{metric}={'-' if mean is None else f'{mean:.4f}'}{marker}")
    return f"{variant:<22} {stage:<9} " + " ".join(cells)
