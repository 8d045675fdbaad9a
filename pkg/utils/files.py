"""
File handling utilities.

Every artifact the pipeline produces (label files, checkpoints, run files,
reports, index directories) is written next to its final location first and
then renamed into place, so a failed command never leaves a partial output
behind. Content hashes of inputs are computed here as well, for report
headers.
"""
import os
import shutil
import hashlib
import logging
import tempfile
from contextlib import contextmanager

logger = logging.getLogger(__name__)

_CHUNK_SIZE = 1 << 16


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return parent


@contextmanager
def atomic_write(path, mode='w', encoding='utf-8'):
    """
    Opens a temporary file beside `path` and renames it over `path` on success.

    Args:
        path (str): Final destination.
        mode (str): 'w' for text or 'wb' for bytes.
        encoding (str): Text encoding; ignored in binary mode.

    Yields:
        file object: The temporary file to write into.

    Example:
        with atomic_write("out/run.trec") as f:
            f.write(line)
    """
    parent = _ensure_parent(path)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp-', dir=parent)
    try:
        if 'b' in mode:
            handle = os.fdopen(fd, mode)
        else:
            # newline='' keeps '\n' on every platform so outputs stay byte-identical.
            handle = os.fdopen(fd, mode, encoding=encoding, newline='')
        with handle:
            yield handle
        os.replace(tmp_path, path)
        logger.debug("Wrote file atomically.", extra={'path': path})
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_text(path, text):
    """Writes `text` to `path` atomically."""
    with atomic_write(path) as f:
        f.write(text)


@contextmanager
def atomic_directory(path):
    """
    Yields a temporary sibling directory that replaces `path` on success.

    An existing directory at `path` is removed only after the new content has
    been fully written.
    """
    parent = _ensure_parent(path)
    tmp_dir = tempfile.mkdtemp(prefix='.tmp-', dir=parent)
    try:
        yield tmp_dir
        if os.path.isdir(path):
            shutil.rmtree(path)
        os.replace(tmp_dir, path)
        logger.debug("Wrote directory atomically.", extra={'path': path})
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise


def sha256_file(path):
    """Hex sha256 of a file's bytes (directories hash their sorted file contents)."""
    digest = hashlib.sha256()
    if os.path.isdir(path):
        for root, dirs, files in os.walk(path):
            dirs.sort()
            for name in sorted(files):
                file_path = os.path.join(root, name)
                digest.update(os.path.relpath(file_path, path).encode('utf-8'))
                digest.update(sha256_file(file_path).encode('ascii'))
        return digest.hexdigest()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(_CHUNK_SIZE), b''):
            digest.update(chunk)
    return digest.hexdigest()


def input_hashes(paths):
    """
    Maps each existing input path to its sha256; unset paths are skipped.

    Args:
        paths (dict): Setting key -> path (or None).

    Returns:
        dict: Setting key -> hex digest, sorted by key.
    """
    return {key: sha256_file(path) for key, path in sorted(paths.items()) if path and os.path.exists(path)}
