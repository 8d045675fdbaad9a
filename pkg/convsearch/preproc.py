"""
Deterministic text normalization shared by labeling, modeling and retrieval.

Term identity must be the same everywhere: the overlap that defines the
positive labels, the vocabulary of the resolver model and the inverted index
all go through `tokenize` and `normalize` from this module.

Tokenization splits on whitespace and strips punctuation from both edges of
each token. Intra-token hyphens and apostrophes survive, except that a
possessive "'s" is split off into its own token (and then filtered as a
stopword). Numerals are kept.

Normalization lowercases, drops stopwords (bundled list in
`data/stopwords.txt`) and applies NLTK's Porter stemmer until the stem no
longer changes, which makes `normalize` idempotent.
"""
import os
import hashlib
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Optional

import nltk
from nltk.stem import PorterStemmer

PREPROCESSING_VERSION = "1"
STOPWORDS_PATH = os.path.join(os.path.dirname(__file__), "data", "stopwords.txt")

_APOSTROPHES = ("'", "’")
_POSSESSIVE = "'s"


def _load_stopwords(path):
    with open(path, "rb") as f:
        raw = f.read()
    words = frozenset(line.strip() for line in raw.decode("utf-8").split("\n") if line.strip())
    return words, hashlib.sha256(raw).hexdigest()


STOPWORDS, STOPWORDS_SHA256 = _load_stopwords(STOPWORDS_PATH)
_STEMMER = PorterStemmer()


def preprocessing_signature():
    """
    Describes the active preprocessing configuration.

    Persisted with every index so that a query pipeline using a different
    stemmer, stopword list or tokenizer is rejected instead of silently
    producing mismatched terms.
    """
    return {
        "version": PREPROCESSING_VERSION,
        "tokenizer": "whitespace+edge-punctuation+possessive-split",
        "stemmer": "nltk-porter-fixed-point",
        "nltk_version": nltk.__version__,
        "stopwords_sha256": STOPWORDS_SHA256,
    }


class Origin(str, Enum):
    """Which part of a model input a token comes from."""
    HISTORY = "history"
    CURRENT = "current"
    SPECIAL = "special"


@dataclass(frozen=True)
class Token:
    surface: str
    term: Optional[str]
    origin: Origin = Origin.CURRENT
    turn: Optional[int] = None # 1-based turn index for history/current tokens


@dataclass(frozen=True)
class TokenSequence:
    """An ordered, immutable run of tokens in original text order."""
    tokens: tuple = ()

    def __len__(self):
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    def __add__(self, other):
        return TokenSequence(self.tokens + tuple(other.tokens))

    def surfaces(self):
        return [token.surface for token in self.tokens]

    def terms(self):
        return [token.term for token in self.tokens]


def _is_punctuation(char):
    # Unicode punctuation (P*) and symbols (S*) count as edge punctuation.
    return unicodedata.category(char)[0] in ("P", "S")


def _strip_edges(text):
    start, end = 0, len(text)
    while start < end and _is_punctuation(text[start]):
        start += 1
    while end > start and _is_punctuation(text[end - 1]):
        end -= 1
    return text[start:end]


def _split_chunk(chunk):
    """Yields the surface tokens of one whitespace-delimited chunk."""
    core = chunk
    while core and _is_punctuation(core[-1]) and not _is_possessive(core):
        core = core[:-1]
    if not core:
        return
    if core[0] in _APOSTROPHES and core[1:].lower() == "s":
        yield core
        return
    if len(core) > 2 and _is_possessive(core):
        base = _strip_edges(core[:-2])
        if base:
            yield base
        yield core[-2:]
        return
    stripped = _strip_edges(core)
    if stripped:
        yield stripped


def _is_possessive(text):
    return len(text) >= 2 and text[-2] in _APOSTROPHES and text[-1] in ("s", "S")


def tokenize(text, origin=Origin.CURRENT, turn=None):
    """
    Splits raw text into a TokenSequence.

    Args:
        text (str): Raw Unicode text; empty text yields an empty sequence.
        origin (Origin): Origin stamped on every produced token.
        turn (int, optional): Turn index stamped on every produced token.

    Returns:
        TokenSequence: Tokens in text order, each carrying its normalized Term
        (None for stopwords).
    """
    tokens = []
    for chunk in text.split():
        for surface in _split_chunk(chunk):
            tokens.append(Token(surface=surface, term=normalize(surface), origin=origin, turn=turn))
    return TokenSequence(tuple(tokens))


@lru_cache(maxsize=65536)
def normalize(token):
    """
    Maps a raw token to its Term, or None when the token is filtered.

    Lowercases, rejects stopwords, then stems to a fixed point. A stem that
    lands on a stopword is filtered too, so normalize(normalize(t)) ==
    normalize(t) whenever normalize(t) is not None.

    Args:
        token (str): A single raw token.

    Returns:
        str or None: The Term surface, or None.
    """
    lowered = token.lower().replace("’", "'")
    if not lowered or any(ch.isspace() for ch in lowered) or lowered in STOPWORDS:
        return None
    stem = lowered
    while True:
        next_stem = _STEMMER.stem(stem)
        if next_stem == stem:
            break
        stem = next_stem
    if not stem or stem in STOPWORDS:
        return None
    return stem


def term_set(sequence):
    """The deduplicated set of non-None Terms of a TokenSequence."""
    return frozenset(token.term for token in sequence if token.term is not None)


def text_terms(text):
    """Shorthand for term_set(tokenize(text))."""
    return term_set(tokenize(text))


def terms_of_texts(texts: Iterable[str]):
    """Union of the Terms of several texts."""
    result = set()
    for text in texts:
        result |= text_terms(text)
    return frozenset(result)


def term_counts(text):
    """Term frequencies of a text (stopwords excluded)."""
    return Counter(token.term for token in tokenize(text) if token.term is not None)
