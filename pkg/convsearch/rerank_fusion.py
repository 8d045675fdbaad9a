"""
Second-stage reranking and reciprocal rank fusion.

`rerank` reorders an initial ranked list with any Scorer, a callable
`(ResolvedQuery, passage_text) -> float` where higher is better. `rrf_fuse`
combines ranked lists by rank alone:

    score(p) = sum over lists L containing p of 1 / (k + rank(p, L))

with 1-based ranks. The fused list covers exactly the passages of the first
list.
"""
import math
import logging
from typing import Callable, Mapping

from convsearch.error import InputError
from convsearch.preproc import term_counts
from convsearch.retrieval import DEFAULT_MU, RankedList, ResolvedQuery, ql_from_counts

logger = logging.getLogger(__name__)

DEFAULT_K_RRF = 60.0

Scorer = Callable[[ResolvedQuery, str], float]


# --- Scorers ---
class OverlapScorer:
    """
    Length-normalized weighted term overlap:

        sum_t min(w(t), tf(t, p)) / |p|

    Passages without any term score 0.
    """
    name = "overlap"

    def __call__(self, query, passage_text):
        counts = term_counts(passage_text)
        length = sum(counts.values())
        if length == 0:
            return 0.0
        return math.fsum(min(weight, counts.get(term, 0)) for term, weight in sorted(query.weights.items())) / length


class QueryLikelihoodScorer:
    """Dirichlet query likelihood recomputed from passage text and the index's collection statistics."""
    name = "ql"

    def __init__(self, index, mu=DEFAULT_MU):
        self.collection_freq = index.collection_freq
        self.total_tokens = index.total_tokens
        self.mu = mu

    def __call__(self, query, passage_text):
        counts = term_counts(passage_text)
        return ql_from_counts(query.weights, counts, sum(counts.values()),
                              self.collection_freq, self.total_tokens, self.mu)


SCORERS = {
    OverlapScorer.name: lambda index, mu: OverlapScorer(),
    QueryLikelihoodScorer.name: lambda index, mu: QueryLikelihoodScorer(index, mu),
}


# --- Operations ---
def rerank(scorer, initial, query, passages: Mapping[str, str]):
    """
    Rescores every passage of `initial` with `scorer`.

    Args:
        scorer (Scorer): Scoring function.
        initial (RankedList): First-stage ranking.
        query (ResolvedQuery): The query the scorer sees.
        passages (mapping): Passage id -> raw text.

    Returns:
        RankedList: Same passages, ordered by the new scores (ties by passage id).

    Raises:
        InputError: If a passage of `initial` has no text.
    """
    scores = {}
    for passage_id in initial.passage_ids():
        text = passages.get(passage_id)
        if text is None:
            raise InputError(
                f"No text for passage '{passage_id}' in ranked list for '{initial.query_id}'.",
                passage_id=passage_id, query_id=initial.query_id
            )
        scores[passage_id] = float(scorer(query, text))
    return RankedList.from_scores(initial.query_id, scores)


def rrf_fuse(lists, k=DEFAULT_K_RRF):
    """
    Reciprocal rank fusion over the passages of the first list.

    Args:
        lists (list of RankedList): At least one list; the first defines the
            passages that are fused.
        k (float): Fusion constant, > 0.

    Returns:
        RankedList: Fused scores, descending, ties by ascending passage id.

    Raises:
        InputError: If `lists` is empty or k <= 0.
    """
    if not lists:
        raise InputError("rrf_fuse needs at least one ranked list.")
    if k <= 0:
        raise InputError(f"RRF constant k must be > 0, got {k}.", k=k)
    universe = lists[0].passage_ids()
    rank_maps = [ranked.ranks() for ranked in lists]
    scores = {}
    for passage_id in universe:
        # fsum makes the total independent of the order the lists are given in.
        scores[passage_id] = math.fsum(
            1.0 / (k + ranks[passage_id]) for ranks in rank_maps if passage_id in ranks
        )
    return RankedList.from_scores(lists[0].query_id, scores)
