"""
Inverted-index passage retrieval with Dirichlet-smoothed query likelihood.

Also hosts the RM3 pseudo-relevance-feedback expansion and a full-scan
reference scorer that recomputes every statistic from raw passage text.
Indexed search and the full scan must agree to floating-point precision;
the tests hold them to that.

Scoring of a passage p for a weighted query bag q:

    score(q, p) = sum_t w(t) * log((tf(t, p) + mu * cf(t) / T) / (|p| + mu))

over query terms t with collection frequency cf(t) > 0, where T is the total
number of term tokens in the collection. Only passages that contain at least
one query term are ranked.
"""
import math
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from convsearch.error import InputError
from convsearch.preproc import preprocessing_signature, term_counts, text_terms, tokenize
from utils.context_runner import run_ordered

logger = logging.getLogger(__name__)

DEFAULT_MU = 2500.0
DEFAULT_DEPTH = 1000


# --- Queries and Ranked Lists ---
@dataclass(frozen=True)
class ResolvedQuery:
    """
    A bag of Terms with weights, ready for scoring.

    Integer weights come from term counts (resolve, Original baselines);
    real weights come from RM3 interpolation.
    """
    weights: Mapping[str, float]
    query_id: str = ""

    def terms(self):
        """Terms with a positive weight."""
        return frozenset(term for term, weight in self.weights.items() if weight > 0)

    def is_empty(self):
        return not self.terms()

    def scaled(self, factor):
        return ResolvedQuery({t: w * factor for t, w in self.weights.items()}, self.query_id)

    @classmethod
    def from_counts(cls, counts, query_id=""):
        return cls({term: float(count) for term, count in counts.items() if count}, query_id)

    @classmethod
    def from_text(cls, text, query_id=""):
        return cls.from_counts(term_counts(text), query_id)

    def to_json(self):
        return {"query_id": self.query_id, "weights": {t: self.weights[t] for t in sorted(self.weights)}}

    @classmethod
    def from_json(cls, record):
        return cls({str(t): float(w) for t, w in record["weights"].items()}, str(record.get("query_id", "")))


@dataclass(frozen=True)
class Passage:
    id: str
    text: str


@dataclass(frozen=True)
class RankedList:
    """Scored passages for one query: scores non-increasing, ties by ascending passage id."""
    query_id: str
    entries: tuple = ()

    def __post_init__(self):
        seen = set()
        for position, (passage_id, score) in enumerate(self.entries):
            if passage_id in seen:
                raise InputError(
                    f"Duplicate passage '{passage_id}' in ranked list for '{self.query_id}'.",
                    query_id=self.query_id, passage_id=passage_id
                )
            seen.add(passage_id)
            if position:
                prev_id, prev_score = self.entries[position - 1]
                if score > prev_score or (score == prev_score and passage_id < prev_id):
                    raise InputError(
                        f"Ranked list for '{self.query_id}' is not sorted at rank {position + 1}.",
                        query_id=self.query_id, rank=position + 1
                    )

    def __len__(self):
        return len(self.entries)

    def passage_ids(self):
        return [passage_id for passage_id, _ in self.entries]

    def ranks(self):
        """Passage id -> 1-based rank."""
        return {passage_id: rank for rank, (passage_id, _) in enumerate(self.entries, start=1)}

    @classmethod
    def from_scores(cls, query_id, scores, k=None):
        """Sorts a passage id -> score mapping by (-score, passage id) and keeps the top k."""
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(query_id, tuple((pid, float(score)) for pid, score in ordered))


# --- Index ---
@dataclass
class InvertedIndex:
    """
    Term -> postings with the statistics query likelihood needs.

    Attributes:
        postings (dict): Term -> list of (passage id, tf), sorted by passage id.
        doc_len (dict): Passage id -> number of term tokens (stopwords excluded).
        collection_freq (dict): Term -> total occurrences in the collection.
        total_tokens (int): Sum of all doc_len values.
        doc_terms (dict): Passage id -> Counter of its terms (forward index).
        signature (dict): Preprocessing configuration the index was built with.
    """
    postings: dict = field(default_factory=dict)
    doc_len: dict = field(default_factory=dict)
    collection_freq: dict = field(default_factory=dict)
    total_tokens: int = 0
    doc_terms: dict = field(default_factory=dict)
    signature: dict = field(default_factory=preprocessing_signature)

    def __len__(self):
        return len(self.doc_len)

    def __contains__(self, passage_id):
        return passage_id in self.doc_len

    def vocabulary_size(self):
        return len(self.collection_freq)

    def check_invariants(self):
        """Raises AssertionError if the postings and statistics disagree."""
        for term, postings in self.postings.items():
            ids = [pid for pid, _ in postings]
            assert ids == sorted(ids), f"postings for '{term}' not sorted"
            assert sum(tf for _, tf in postings) == self.collection_freq[term], f"cf mismatch for '{term}'"
        assert sum(self.doc_len.values()) == self.total_tokens, "total_tokens mismatch"


def _count_passage(passage):
    return passage.id, term_counts(passage.text)


def build_index(collection, workers=1):
    """
    Builds an InvertedIndex from passages.

    Tokenization may run on several threads; the merge is keyed by passage id,
    so the index does not depend on insertion order or worker count.

    Args:
        collection (iterable of Passage): Passages with unique ids.
        workers (int): Threads for tokenization.

    Returns:
        InvertedIndex: The built index.

    Raises:
        InputError: If a passage id occurs twice.
    """
    passages = list(collection)
    seen = set()
    for passage in passages:
        if passage.id in seen:
            raise InputError(f"Duplicate passage id '{passage.id}'.", passage_id=passage.id)
        seen.add(passage.id)

    counted = run_ordered(_count_passage, passages, workers) # Results come back in input order.

    index = InvertedIndex()
    postings = defaultdict(list)
    for passage_id, counts in sorted(counted, key=lambda item: item[0]): # Ascending ids keep postings sorted.
        index.doc_terms[passage_id] = counts
        length = sum(counts.values())
        index.doc_len[passage_id] = length
        index.total_tokens += length
        for term in sorted(counts):
            postings[term].append((passage_id, counts[term]))
            index.collection_freq[term] = index.collection_freq.get(term, 0) + counts[term]
    index.postings = dict(postings)

    logger.info(
        "Built inverted index.",
        extra={'passages': len(index), 'terms': index.vocabulary_size(), 'total_tokens': index.total_tokens}
    )
    return index


# --- Query Likelihood ---
def ql_from_counts(weights, counts, length, collection_freq, total_tokens, mu):
    """Dirichlet query log-likelihood of one passage from its raw term counts."""
    score = 0.0
    for term in sorted(weights): # Fixed summation order keeps scores bit-identical across runs.
        cf = collection_freq.get(term, 0)
        if cf == 0:
            continue # log(0) guard: terms unseen in the collection contribute nothing.
        score += weights[term] * math.log((counts.get(term, 0) + mu * cf / total_tokens) / (length + mu))
    return score


def ql_score(index, query, passage_id, mu=DEFAULT_MU):
    """
    Dirichlet-smoothed query log-likelihood of one passage.

    Args:
        index (InvertedIndex): The collection.
        query (ResolvedQuery): Weighted query bag.
        passage_id (str): A passage in the index.
        mu (float): Dirichlet prior, > 0.

    Returns:
        float: The score (0.0 when no query term occurs in the collection).

    Raises:
        InputError: If the passage is not in the index or mu <= 0.
    """
    if mu <= 0:
        raise InputError(f"mu must be > 0, got {mu}.", mu=mu)
    if passage_id not in index.doc_len:
        raise InputError(f"Unknown passage id '{passage_id}'.", passage_id=passage_id)
    return ql_from_counts(query.weights, index.doc_terms[passage_id], index.doc_len[passage_id],
                          index.collection_freq, index.total_tokens, mu)


def candidates(index, query):
    """Passage ids that contain at least one positively weighted query term."""
    found = set()
    for term in query.terms():
        found.update(pid for pid, _ in index.postings.get(term, ())) # Unknown terms have no postings.
    return found


def search(index, query, k=DEFAULT_DEPTH, mu=DEFAULT_MU):
    """
    Top-k passages by query likelihood.

    Args:
        index (InvertedIndex): The collection.
        query (ResolvedQuery): Weighted query bag.
        k (int): Depth, >= 1.
        mu (float): Dirichlet prior.

    Returns:
        RankedList: Empty when the bag is empty or shares no term with the collection.
    """
    if k < 1:
        raise InputError(f"Search depth must be >= 1, got {k}.", k=k)
    scores = {pid: ql_score(index, query, pid, mu) for pid in candidates(index, query)}
    return RankedList.from_scores(query.query_id, scores, k)


def full_scan_search(collection, query, k=DEFAULT_DEPTH, mu=DEFAULT_MU):
    """
    Reference scorer: recounts every statistic from raw passage text.

    Slow, but shares no state with the index, which makes it the oracle for
    `search` in tests and a debugging aid for odd rankings.
    """
    passages = list(collection)
    counts = {p.id: Counter(t.term for t in tokenize(p.text) if t.term is not None) for p in passages}
    collection_freq = Counter()
    for passage_counts in counts.values():
        collection_freq.update(passage_counts)
    total_tokens = sum(collection_freq.values())
    query_terms = query.terms()
    scores = {}
    for passage in passages:
        passage_counts = counts[passage.id]
        if not query_terms & text_terms(passage.text): # Same candidate rule as the index.
            continue
        scores[passage.id] = ql_from_counts(query.weights, passage_counts, sum(passage_counts.values()),
                                            collection_freq, total_tokens, mu)
    return RankedList.from_scores(query.query_id, scores, k)


# --- RM3 ---
def _normalized(weights):
    total = sum(weights.values())
    if total <= 0:
        return {}
    return {term: weight / total for term, weight in weights.items()}


def relevance_model(index, ranked):
    """
    P(t|R) over the feedback passages, up to normalization.

    Each passage contributes tf(t, p) / |p| weighted by exp(score(q, p)).
    Scores are shifted by their maximum first; the shift cancels on
    normalization.
    """
    if not ranked.entries:
        return {}
    top_score = ranked.entries[0][1] # Log scores; exp() of the raw values underflows.
    model = defaultdict(float)
    for passage_id, score in ranked.entries:
        length = index.doc_len[passage_id]
        if length == 0: # All-stopword passage.
            continue
        passage_weight = math.exp(score - top_score)
        for term, tf in index.doc_terms[passage_id].items():
            model[term] += passage_weight * tf / length
    return dict(model)


def rm3_expand(index, query, n=10, k_terms=10, lambda_orig=0.8, mu=DEFAULT_MU):
    """
    RM3 pseudo-relevance feedback.

    Retrieves the top n passages for `query`, estimates a relevance model from
    them, keeps its k_terms most probable terms (ties by ascending term) and
    interpolates: lambda_orig * original + (1 - lambda_orig) * expansion, both
    components normalized to sum to 1.

    Args:
        index (InvertedIndex): The collection.
        query (ResolvedQuery): Query to expand.
        n (int): Feedback passages, >= 1.
        k_terms (int): Expansion terms, >= 1.
        lambda_orig (float): Original query weight in [0, 1].
        mu (float): Dirichlet prior for the feedback retrieval.

    Returns:
        ResolvedQuery: The interpolated query; `query` itself when nothing is retrieved.
    """
    if n < 1 or k_terms < 1 or not 0.0 <= lambda_orig <= 1.0:
        raise InputError(
            "RM3 requires n >= 1, k_terms >= 1 and lambda_orig in [0, 1].",
            n=n, k_terms=k_terms, lambda_orig=lambda_orig
        )
    feedback = search(index, query, k=n, mu=mu)
    if not feedback.entries:
        logger.debug("RM3 feedback retrieved nothing; keeping the original query.",
                     extra={'query_id': query.query_id})
        return query

    model = relevance_model(index, feedback)
    selected = sorted(model.items(), key=lambda item: (-item[1], item[0]))[:k_terms] # Ties by ascending term.
    expansion = _normalized(dict(selected))
    original = _normalized({t: w for t, w in query.weights.items() if w > 0}) # Non-positive weights drop out.

    weights = {}
    for term in sorted(set(original) | set(expansion)):
        weights[term] = lambda_orig * original.get(term, 0.0) + (1.0 - lambda_orig) * expansion.get(term, 0.0)
    return ResolvedQuery(weights, query.query_id)


def search_many(index, queries, k=DEFAULT_DEPTH, mu=DEFAULT_MU, workers=1):
    """Runs `search` for every query; results follow the order of `queries`."""
    return run_ordered(lambda query: search(index, query, k, mu), queries, workers)
