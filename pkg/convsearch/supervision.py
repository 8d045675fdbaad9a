"""
Per-term training labels for query resolution.

A conversation history term is a positive ("resolution term") for turn i when
it appears in a reference text for the turn and not in the turn itself:

    positives = terms(reference) ∩ terms(history) \\ terms(current)

The reference is either a gold rewrite of the turn or, under distant
supervision, a passage judged relevant to the turn (or, for answer-span
datasets, a character window around the answer). This module computes those
sets and assembles model-ready `LabeledExample`s.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from convsearch.error import InputError
from convsearch.preproc import Origin, Token, TokenSequence, term_set, terms_of_texts, text_terms, tokenize

logger = logging.getLogger(__name__)

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
DEFAULT_MAX_LEN = 256
DEFAULT_WINDOW = 50


# --- Conversation Types ---
@dataclass(frozen=True)
class AnswerSpan:
    document: str
    start: int
    end: int

    @property
    def text(self):
        return self.document[self.start:self.end]


@dataclass(frozen=True)
class Turn:
    turn_index: int
    query: str
    gold_rewrite: Optional[str] = None
    relevant_passage_ids: tuple = ()
    answer_span: Optional[AnswerSpan] = None


@dataclass(frozen=True)
class Topic:
    topic_id: str
    turns: tuple

    def __post_init__(self):
        if not self.turns:
            raise InputError(f"Topic '{self.topic_id}' has no turns.", topic_id=self.topic_id)
        indices = [turn.turn_index for turn in self.turns]
        if indices != list(range(1, len(indices) + 1)):
            raise InputError(
                f"Topic '{self.topic_id}' turn indices must be 1..n in order, got {indices}.",
                topic_id=self.topic_id
            )

    def turn(self, turn_index):
        if not 1 <= turn_index <= len(self.turns):
            raise InputError(
                f"Topic '{self.topic_id}' has no turn {turn_index}.", topic_id=self.topic_id, turn=turn_index
            )
        return self.turns[turn_index - 1]

    def query_id(self, turn_index):
        return f"{self.topic_id}_{turn_index}"


def history_texts(topic, turn_index, include_answers=False):
    """
    Raw texts of turns 1..turn_index-1, in order.

    With `include_answers`, each earlier turn's answer span text follows its
    query, as in answer-span datasets where the dialogue history shows the
    previous answers.
    """
    texts = []
    for turn in topic.turns[:turn_index - 1]:
        texts.append(turn.query)
        if include_answers and turn.answer_span is not None:
            texts.append(turn.answer_span.text)
    return texts


# --- Resolution Term Sets ---
def gold_resolution_terms(gold_rewrite, history, current):
    """terms(gold_rewrite) ∩ terms(history) \\ terms(current)."""
    return frozenset((text_terms(gold_rewrite) & terms_of_texts(history)) - text_terms(current))


def distant_resolution_terms(relevant_passage, history, current):
    """
    The gold-rewrite rule with a relevant passage in place of the rewrite.

    Args:
        relevant_passage (str or list of str): One passage, or several; with
            several passages the result is the union of the per-passage sets.
        history (list of str): Raw texts of the earlier turns.
        current (str): Raw current turn query.

    Returns:
        frozenset of str: The distant resolution terms.
    """
    passages = [relevant_passage] if isinstance(relevant_passage, str) else list(relevant_passage)
    history_terms = terms_of_texts(history)
    current_terms = text_terms(current)
    result = set()
    for passage in passages:
        result |= (text_terms(passage) & history_terms) - current_terms
    return frozenset(result)


def extract_answer_window(document, span, window=DEFAULT_WINDOW):
    """
    Cuts a passage-length text around an answer span.

    Args:
        document (str): The full document text.
        span (tuple of int): (start, end) character offsets of the answer.
        window (int): Characters kept on each side of the span.

    Returns:
        str: document[max(0, start - window):min(len, end + window)].

    Raises:
        InputError: If the offsets are not 0 <= start <= end <= len(document)
            or the window is negative.
    """
    start, end = span
    if not (0 <= start <= end <= len(document)) or window < 0:
        raise InputError(
            f"Invalid answer span ({start}, {end}) for a document of length {len(document)}.",
            start=start, end=end, length=len(document)
        )
    return document[max(0, start - window):min(len(document), end + window)]


# --- Model-Ready Examples ---
@dataclass(frozen=True)
class LabeledExample:
    topic_id: str
    turn: int
    sequence: TokenSequence
    labels: tuple
    mask: tuple

    def __post_init__(self):
        if not (len(self.sequence) == len(self.labels) == len(self.mask)):
            raise InputError("Sequence, labels and mask lengths differ.", topic_id=self.topic_id, turn=self.turn)
        for token, label, bit in zip(self.sequence, self.labels, self.mask):
            expected = int(token.origin is Origin.HISTORY and token.term is not None)
            if bit != expected or (label and not bit):
                raise InputError(
                    "Label/mask inconsistent with token origins.", topic_id=self.topic_id, turn=self.turn
                )

    @property
    def query_id(self):
        return f"{self.topic_id}_{self.turn}"

    def positive_terms(self):
        return frozenset(t.term for t, label in zip(self.sequence, self.labels) if label)

    def history_terms(self):
        return frozenset(t.term for t, bit in zip(self.sequence, self.mask) if bit)

    def current_terms(self):
        return term_set(TokenSequence(tuple(t for t in self.sequence if t.origin is Origin.CURRENT)))

    def masked_positions(self):
        return [i for i, bit in enumerate(self.mask) if bit]

    def to_json(self):
        return {
            "topic_id": self.topic_id,
            "turn": self.turn,
            "tokens": self.sequence.surfaces(),
            "terms": self.sequence.terms(),
            "origins": [t.origin.value for t in self.sequence],
            "turns": [t.turn for t in self.sequence],
            "labels": list(self.labels),
            "mask": list(self.mask),
        }

    @classmethod
    def from_json(cls, record):
        try:
            tokens = tuple(
                Token(surface=s, term=t, origin=Origin(o), turn=n)
                for s, t, o, n in zip(record["tokens"], record["terms"], record["origins"], record["turns"])
            )
            return cls(
                topic_id=str(record["topic_id"]),
                turn=int(record["turn"]),
                sequence=TokenSequence(tokens),
                labels=tuple(int(x) for x in record["labels"]),
                mask=tuple(int(x) for x in record["mask"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Malformed labeled example record: {e}") from e


def _special(surface):
    return Token(surface=surface, term=None, origin=Origin.SPECIAL, turn=None)


def build_example(topic, turn_index, positives, max_len=DEFAULT_MAX_LEN, include_answers=False):
    """
    Builds the term-classification input for one turn.

    Layout: [CLS] history tokens (turn order) [SEP] current-turn tokens.
    History positions carrying a Term are masked in; everything else is
    masked out. When the sequence exceeds `max_len`, the oldest history
    tokens are dropped first; current-turn tokens are never dropped.

    Args:
        topic (Topic): The conversation.
        turn_index (int): 1-based index of the current turn.
        positives (set of str): Terms labeled relevant.
        max_len (int): Maximum number of positions.
        include_answers (bool): Put earlier answers into the history.

    Returns:
        LabeledExample or None: None for turn 1, which has no history.

    Raises:
        InputError: If the current turn alone does not fit into `max_len`.
    """
    if turn_index <= 1:
        return None
    current_turn = topic.turn(turn_index)

    history = []
    for turn in topic.turns[:turn_index - 1]:
        history.extend(tokenize(turn.query, Origin.HISTORY, turn.turn_index))
        if include_answers and turn.answer_span is not None:
            history.extend(tokenize(turn.answer_span.text, Origin.HISTORY, turn.turn_index))
    current = list(tokenize(current_turn.query, Origin.CURRENT, turn_index))

    room = max_len - 2 - len(current)
    if room < 0:
        raise InputError(
            f"Current turn of {topic.query_id(turn_index)} has {len(current)} tokens; max_len {max_len} is too small.",
            topic_id=topic.topic_id, turn=turn_index
        )
    if len(history) > room:
        logger.debug(
            "Truncating conversation history.",
            extra={'topic_id': topic.topic_id, 'turn': turn_index, 'dropped_tokens': len(history) - room}
        )
        history = history[len(history) - room:]

    tokens = [_special(CLS_TOKEN)] + history + [_special(SEP_TOKEN)] + current
    mask = tuple(int(t.origin is Origin.HISTORY and t.term is not None) for t in tokens)
    labels = tuple(int(bit and t.term in positives) for t, bit in zip(tokens, mask))
    return LabeledExample(topic.topic_id, turn_index, TokenSequence(tuple(tokens)), labels, mask)


# --- Corpus-Level Labeling ---
@dataclass
class LabelingSummary:
    examples: list = field(default_factory=list)
    skipped: Counter = field(default_factory=Counter)
    coverage: list = field(default_factory=list)


def reference_texts(turn, mode, passages=None, window=DEFAULT_WINDOW):
    """
    The reference text(s) the positive-term rule compares against for one turn.

    Returns:
        tuple: (texts, skip_reason). `texts` is None when the turn lacks the
        field the mode needs; `skip_reason` then names what was missing.
    """
    if mode == "gold":
        if not turn.gold_rewrite:
            return None, "missing_rewrite"
        return [turn.gold_rewrite], None
    if mode != "distant":
        raise InputError(f"Unknown labeling mode '{mode}'.", mode=mode)

    texts = []
    if turn.relevant_passage_ids and passages is not None:
        for passage_id in turn.relevant_passage_ids:
            text = passages.get(passage_id)
            if text is not None:
                texts.append(text)
    if not texts and turn.answer_span is not None:
        span = turn.answer_span
        texts.append(extract_answer_window(span.document, (span.start, span.end), window))
    if not texts:
        return None, "missing_relevance"
    return texts, None


def label_topic(topic, mode, passages: Optional[Mapping[str, str]] = None, window=DEFAULT_WINDOW,
                max_len=DEFAULT_MAX_LEN, include_answers=False, summary=None):
    """
    Labels every non-first turn of a topic.

    Args:
        topic (Topic): The conversation.
        mode (str): 'gold' or 'distant'.
        passages (mapping, optional): passage id -> text, for distant mode.
        window (int): Answer window size for answer-span turns.
        max_len (int): Example length cap.
        include_answers (bool): Put earlier answers into the history.
        summary (LabelingSummary, optional): Accumulator to extend.

    Returns:
        LabelingSummary: Examples in turn order plus skip counts.
    """
    summary = summary if summary is not None else LabelingSummary()
    for turn in topic.turns:
        if turn.turn_index == 1:
            summary.skipped["first_turn"] += 1
            continue
        texts, reason = reference_texts(turn, mode, passages, window)
        if texts is None:
            summary.skipped[reason] += 1
            continue
        history = history_texts(topic, turn.turn_index, include_answers)
        if mode == "gold":
            positives = gold_resolution_terms(texts[0], history, turn.query)
            needed = text_terms(texts[0]) - text_terms(turn.query)
            if needed:
                summary.coverage.append(len(needed & terms_of_texts(history)) / len(needed))
        else:
            positives = distant_resolution_terms(texts, history, turn.query)
        example = build_example(topic, turn.turn_index, positives, max_len, include_answers)
        summary.examples.append(example)
    return summary


def label_statistics(examples, coverage=None):
    """
    Dataset statistics in the shape of a query-resolution dataset table.

    Args:
        examples (list of LabeledExample): Labeled queries.
        coverage (list of float, optional): Per-query share of rewrite terms
            found in the history (gold mode only).

    Returns:
        dict: queries, mean/std of total and positive terms per query,
        negative:positive ratio and mean coverage (None when unavailable).
    """
    totals = np.array([sum(e.mask) for e in examples], dtype=float)
    positives = np.array([sum(e.labels) for e in examples], dtype=float)
    stats = {
        "queries": len(examples),
        "total_terms_mean": float(totals.mean()) if len(examples) else 0.0,
        "total_terms_std": float(totals.std()) if len(examples) else 0.0,
        "positive_terms_mean": float(positives.mean()) if len(examples) else 0.0,
        "positive_terms_std": float(positives.std()) if len(examples) else 0.0,
        "negative_positive_ratio": (
            float((totals.sum() - positives.sum()) / positives.sum()) if positives.sum() > 0 else None
        ),
        "coverage": float(np.mean(coverage)) if coverage else None,
    }
    return stats


def subsample(examples, fraction, seed):
    """
    Deterministic subset of `examples` (original order preserved).

    Used to train on a fraction of the gold labels after distant pretraining.
    """
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"Fraction must be in (0, 1], got {fraction}.", fraction=fraction)
    if fraction == 1.0 or not examples:
        return list(examples)
    count = max(1, int(round(fraction * len(examples))))
    rng = np.random.default_rng(seed)
    keep = sorted(rng.permutation(len(examples))[:count].tolist())
    return [examples[i] for i in keep]
