import json
import os

import pytest

from convsearch.error import IndexMismatchError, InputError
from convsearch.index_store import (
    INDEX_FORMAT_VERSION,
    MANIFEST_FILE,
    check_manifest,
    load_index,
    load_passage_texts,
    save_index,
)
from convsearch.preproc import preprocessing_signature
from convsearch.retrieval import Passage, ResolvedQuery, build_index, search
from convsearch.trec_io import read_corpus


@pytest.fixture
def toy_index(toy_paths):
    passages = read_corpus(toy_paths["corpus"])
    return build_index(passages), {p.id: p.text for p in passages}


def test_index_round_trip(tmp_path, toy_index):
    index, texts = toy_index
    index_dir = str(tmp_path / "index")
    save_index(index, index_dir, texts)
    loaded = load_index(index_dir)

    assert loaded.postings == index.postings
    assert loaded.doc_len == index.doc_len
    assert loaded.collection_freq == index.collection_freq
    assert loaded.total_tokens == index.total_tokens
    assert loaded.doc_terms == index.doc_terms
    assert load_passage_texts(index_dir) == texts

    query = ResolvedQuery.from_text("when was saosin founded?", "t1_2")
    assert search(loaded, query) == search(index, query)


def test_save_index_replaces_existing_directory(tmp_path):
    index_dir = str(tmp_path / "index")
    save_index(build_index([Passage("a", "one")]), index_dir, {"a": "one"})
    save_index(build_index([Passage("b", "two")]), index_dir, {"b": "two"})
    assert list(load_index(index_dir).doc_len) == ["b"]


def test_save_index_requires_every_text(tmp_path):
    with pytest.raises(InputError):
        save_index(build_index([Passage("a", "one")]), str(tmp_path / "index"), {})


def test_load_index_missing_directory(tmp_path):
    with pytest.raises(InputError):
        load_index(str(tmp_path / "absent"))


def _manifest(**changes):
    manifest = {"format_version": INDEX_FORMAT_VERSION, "preprocessing": preprocessing_signature()}
    manifest.update(changes)
    return manifest


def test_check_manifest_accepts_current():
    check_manifest(_manifest(), "idx")


@pytest.mark.parametrize("version", ["2.0", "0.9", "not-a-version"])
def test_check_manifest_rejects_other_major_versions(version):
    with pytest.raises(IndexMismatchError):
        check_manifest(_manifest(format_version=version), "idx")


def test_check_manifest_rejects_different_preprocessing():
    signature = dict(preprocessing_signature(), stopwords_sha256="0" * 64)
    with pytest.raises(IndexMismatchError) as excinfo:
        check_manifest(_manifest(preprocessing=signature), "idx")
    assert excinfo.value.context["differing"] == ["stopwords_sha256"]


def test_load_index_with_edited_manifest_is_rejected(tmp_path):
    index_dir = str(tmp_path / "index")
    save_index(build_index([Passage("a", "one")]), index_dir, {"a": "one"})
    manifest_path = os.path.join(index_dir, MANIFEST_FILE)
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    manifest["preprocessing"]["stemmer"] = "other"
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    with pytest.raises(IndexMismatchError):
        load_index(index_dir)
