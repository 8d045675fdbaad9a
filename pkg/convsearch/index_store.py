"""
Persisted index directories.

An index directory holds three files:

- `manifest.json`: format version, preprocessing signature, file list.
- `postings.sqlite`: tables `postings(term, passage_id, tf)` and
  `passages(passage_id, doc_len, text)`.
- `stats.json`: passage count, vocabulary size and total tokens, used to
  cross-check the tables on load.

The directory is written to a temporary sibling and renamed into place.
Loading rejects an index whose format major version or preprocessing
signature differs from the running code with `IndexMismatchError`.
"""
import os
import json
import sqlite3
import logging
from collections import Counter, defaultdict
from contextlib import contextmanager

from packaging.version import InvalidVersion, Version

from convsearch.error import IndexMismatchError, InputError
from convsearch.preproc import preprocessing_signature
from convsearch.retrieval import InvertedIndex
from utils.files import atomic_directory

logger = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = "1.0"
MANIFEST_FILE = "manifest.json"
POSTINGS_FILE = "postings.sqlite"
STATS_FILE = "stats.json"

_SCHEMA = (
    "CREATE TABLE postings (term TEXT NOT NULL, passage_id TEXT NOT NULL, tf INTEGER NOT NULL, "
    "PRIMARY KEY (term, passage_id))",
    "CREATE TABLE passages (passage_id TEXT PRIMARY KEY, doc_len INTEGER NOT NULL, text TEXT NOT NULL)",
)


@contextmanager
def get_index_connection(db_path):
    """
    Provides and manages a connection to a postings database.

    Commits when the `with` block completes, rolls back on any exception and
    always closes the connection.

    Yields:
        sqlite3.Connection: An open connection.
    """
    conn = None
    try:
        conn = sqlite3.connect(db_path, timeout=10)
        logger.debug("Opened postings database.", extra={'path': db_path})
        yield conn
        conn.commit()
    except sqlite3.Error as e:
        logger.error(f"SQLite error on postings database: {e}", extra={'path': db_path})
        if conn:
            conn.rollback()
        raise InputError(f"Unreadable postings database {db_path}: {e}", path=db_path) from e
    except Exception:
        if conn:
            conn.rollback()
        raise
    finally:
        if conn:
            conn.close()


def save_index(index, index_dir, passages):
    """
    Writes an InvertedIndex and the passage texts as a versioned directory.

    Args:
        index (InvertedIndex): Built index.
        index_dir (str): Destination directory (replaced if it exists).
        passages (mapping): Passage id -> raw text, for every indexed passage.

    Raises:
        InputError: If a passage text is missing.
    """
    missing = sorted(pid for pid in index.doc_len if pid not in passages)
    if missing:
        raise InputError(f"No text for {len(missing)} indexed passage(s), e.g. '{missing[0]}'.", passage_id=missing[0])

    with atomic_directory(index_dir) as tmp_dir:
        with get_index_connection(os.path.join(tmp_dir, POSTINGS_FILE)) as conn:
            for statement in _SCHEMA:
                conn.execute(statement)
            conn.executemany(
                "INSERT INTO postings (term, passage_id, tf) VALUES (?, ?, ?)",
                ((term, pid, tf) for term in sorted(index.postings) for pid, tf in index.postings[term])
            )
            conn.executemany(
                "INSERT INTO passages (passage_id, doc_len, text) VALUES (?, ?, ?)",
                ((pid, index.doc_len[pid], passages[pid]) for pid in sorted(index.doc_len))
            )
        stats = {
            "passages": len(index),
            "terms": index.vocabulary_size(),
            "total_tokens": index.total_tokens,
        }
        manifest = {
            "format_version": INDEX_FORMAT_VERSION,
            "preprocessing": index.signature,
            "files": [POSTINGS_FILE, STATS_FILE],
        }
        _write_json(os.path.join(tmp_dir, STATS_FILE), stats)
        _write_json(os.path.join(tmp_dir, MANIFEST_FILE), manifest)

    logger.info("Saved index.", extra={'path': index_dir, **stats})


def _write_json(path, payload):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _read_json(path):
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise InputError(f"Index file missing: {path}", path=path)
    except json.JSONDecodeError as e:
        raise InputError(f"Index file is not valid JSON: {path} ({e})", path=path) from e


def check_manifest(manifest, index_dir):
    """
    Verifies format version and preprocessing signature.

    Raises:
        IndexMismatchError: On a different format major version or any
            difference in the preprocessing signature.
    """
    try:
        found = Version(str(manifest.get("format_version", "")))
    except InvalidVersion:
        raise IndexMismatchError(f"Index at {index_dir} has no valid format_version.", path=index_dir)
    expected = Version(INDEX_FORMAT_VERSION)
    if found.major != expected.major or found > expected:
        raise IndexMismatchError(
            f"Index format {found} is not readable by this version (expects {expected}).",
            path=index_dir, found=str(found), expected=str(expected)
        )
    current = preprocessing_signature()
    stored = manifest.get("preprocessing") or {}
    differing = sorted(key for key in set(current) | set(stored) if current.get(key) != stored.get(key))
    if differing:
        raise IndexMismatchError(
            f"Index at {index_dir} was built with different preprocessing ({', '.join(differing)}); rebuild it.",
            path=index_dir, differing=differing
        )


def load_index(index_dir):
    """
    Reads an index directory written by `save_index`.

    Returns:
        InvertedIndex: The index with its stored signature.

    Raises:
        InputError: Missing or corrupt files.
        IndexMismatchError: Incompatible format or preprocessing.
    """
    if not os.path.isdir(index_dir):
        raise InputError(f"Index directory not found: {index_dir}", path=index_dir)
    manifest = _read_json(os.path.join(index_dir, MANIFEST_FILE))
    check_manifest(manifest, index_dir)
    stats = _read_json(os.path.join(index_dir, STATS_FILE))

    index = InvertedIndex(signature=manifest["preprocessing"])
    postings = defaultdict(list)
    doc_terms = defaultdict(Counter)
    with get_index_connection(os.path.join(index_dir, POSTINGS_FILE)) as conn:
        for passage_id, doc_len in conn.execute("SELECT passage_id, doc_len FROM passages ORDER BY passage_id"):
            index.doc_len[passage_id] = doc_len
            doc_terms[passage_id] = Counter()
        for term, passage_id, tf in conn.execute(
            "SELECT term, passage_id, tf FROM postings ORDER BY term, passage_id"
        ):
            postings[term].append((passage_id, tf))
            doc_terms[passage_id][term] = tf
            index.collection_freq[term] = index.collection_freq.get(term, 0) + tf
    index.postings = dict(postings)
    index.doc_terms = dict(doc_terms)
    index.total_tokens = sum(index.doc_len.values())

    if (stats.get("passages"), stats.get("terms"), stats.get("total_tokens")) != (
        len(index), index.vocabulary_size(), index.total_tokens
    ):
        raise InputError(f"Index at {index_dir} is inconsistent with its stats file.", path=index_dir)
    logger.info("Loaded index.", extra={'path': index_dir, **stats})
    return index


def load_passage_texts(index_dir):
    """Passage id -> raw text, as stored in the index directory."""
    with get_index_connection(os.path.join(index_dir, POSTINGS_FILE)) as conn:
        return {pid: text for pid, text in conn.execute("SELECT passage_id, text FROM passages ORDER BY passage_id")}
