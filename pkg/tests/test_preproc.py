import hashlib

import pytest

from convsearch.preproc import (
    STOPWORDS,
    STOPWORDS_PATH,
    STOPWORDS_SHA256,
    Origin,
    normalize,
    preprocessing_signature,
    term_counts,
    text_terms,
    tokenize,
)

PINNED_STOPWORDS_SHA256 = "9fe5c83675ffe94e146a35bceff4ff9462c17e4c5fb5d35105629edcba2da241"


def test_bundled_stopword_list_is_pinned():
    with open(STOPWORDS_PATH, "rb") as f:
        assert hashlib.sha256(f.read()).hexdigest() == PINNED_STOPWORDS_SHA256
    assert STOPWORDS_SHA256 == PINNED_STOPWORDS_SHA256
    assert preprocessing_signature()["stopwords_sha256"] == PINNED_STOPWORDS_SHA256


@pytest.mark.parametrize("raw, expected", [
    ("released", "relea"),
    ("Released", "relea"),
    ("formed", "form"),
    ("founded", "found"),
    ("Saosin", "saosin"),
    ("first", "first"),
])
def test_normalize_known_stems(raw, expected):
    assert normalize(raw) == expected


@pytest.mark.parametrize("raw", ["the", "The", "was", "'s", "their", "", "two words"])
def test_normalize_filters_stopwords_and_non_tokens(raw):
    assert normalize(raw) is None


@pytest.mark.parametrize("raw", ["released", "databases", "generalizations", "relational", "running", "firebase"])
def test_normalize_is_idempotent(raw):
    term = normalize(raw)
    assert term is not None
    assert normalize(term) == term


def test_tokenize_strips_edge_punctuation_and_splits_possessive():
    tokens = tokenize("when was saosin's first album released?")
    assert tokens.surfaces() == ["when", "was", "saosin", "'s", "first", "album", "released"]
    assert tokens.terms() == [None, None, "saosin", None, "first", "album", "relea"]


def test_tokenize_keeps_intra_token_hyphens_and_numerals():
    tokens = tokenize("A real-time database (2003).")
    assert tokens.surfaces() == ["A", "real-time", "database", "2003"]
    assert tokens.terms()[3] == "2003"


def test_tokenize_stamps_origin_and_turn():
    tokens = tokenize("who formed saosin?", Origin.HISTORY, 1)
    assert {t.origin for t in tokens} == {Origin.HISTORY}
    assert {t.turn for t in tokens} == {1}


def test_empty_text():
    assert len(tokenize("")) == 0
    assert text_terms("") == frozenset()


def test_term_counts_excludes_stopwords():
    counts = term_counts("The album, the album and the band.")
    assert counts == {"album": 2, "band": 1}


def test_stopword_list_contains_possessive_marker():
    assert "'s" in STOPWORDS
