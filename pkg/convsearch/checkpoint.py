"""
Model checkpoints as versioned JSON containers.

Layout:

    {
      "format_version": "1.0",
      "encoder_config": {...},
      "vocabulary": ["[PAD]", "[UNK]", "[CLS]", "[SEP]", ...],
      "params": {name: {"shape": [...], "data": [flat floats]}},
      "training": [{epoch, train_loss, dev_f1}, ...],
      "sha256": hex digest of the canonical JSON of every other field
    }

The digest is verified on load; a checkpoint whose content was altered is
rejected rather than silently producing different predictions.
"""
import json
import hashlib
import logging

import torch
from packaging.version import InvalidVersion, Version

from convsearch.encoder import SPECIAL_TOKENS, EncoderConfig, ResolverModel, Vocabulary
from convsearch.error import InputError
from utils.files import atomic_write

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = "1.0"


def _digest(payload):
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def checkpoint_payload(model):
    """The checkpoint content of a model, without the digest."""
    params = {}
    for name, tensor in model.state_dict().items():
        values = tensor.detach().cpu()
        params[name] = {"shape": list(values.shape), "data": values.reshape(-1).tolist()}
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder_config": model.config.to_dict(),
        "vocabulary": list(model.vocabulary.itos),
        "params": params,
        "training": list(getattr(model, "history", [])),
    }


def save_checkpoint(model, path):
    """Writes `model` to `path` atomically; returns the content digest."""
    payload = checkpoint_payload(model)
    digest = _digest(payload)
    payload["sha256"] = digest
    with atomic_write(path) as f:
        f.write(json.dumps(payload, sort_keys=True, ensure_ascii=False))
        f.write("\n")
    logger.info("Saved model checkpoint.", extra={'path': path, 'sha256': digest,
                                                  'parameters': sum(p.numel() for p in model.parameters())})
    return digest


def load_checkpoint(path):
    """
    Reads a checkpoint written by `save_checkpoint`.

    Returns:
        ResolverModel: The model in eval mode, with `history` restored.

    Raises:
        InputError: Missing file, unsupported format version, digest mismatch
            or parameters that do not fit the stored configuration.
    """
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise InputError(f"Checkpoint not found: {path}", path=path)
    except json.JSONDecodeError as e:
        raise InputError(f"Checkpoint is not valid JSON: {path} ({e})", path=path) from e

    try:
        version = Version(str(payload.get("format_version", "")))
    except InvalidVersion:
        raise InputError(f"Checkpoint {path} has no valid format_version.", path=path)
    if version.major != Version(CHECKPOINT_FORMAT_VERSION).major:
        raise InputError(f"Unsupported checkpoint format {version}.", path=path, format_version=str(version))

    stored_digest = payload.pop("sha256", None)
    if stored_digest != _digest(payload):
        raise InputError(f"Checkpoint {path} failed its content hash check.", path=path)

    itos = payload["vocabulary"]
    if tuple(itos[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
        raise InputError(f"Checkpoint {path} vocabulary does not start with the special tokens.", path=path)
    vocabulary = Vocabulary(itos[len(SPECIAL_TOKENS):])
    config = EncoderConfig(**payload["encoder_config"])
    model = ResolverModel(config, vocabulary)

    state = {}
    expected = model.state_dict()
    for name, entry in payload["params"].items():
        if name not in expected:
            raise InputError(f"Checkpoint {path} has unexpected parameter '{name}'.", path=path)
        tensor = torch.tensor(entry["data"], dtype=expected[name].dtype).reshape(entry["shape"])
        if tensor.shape != expected[name].shape:
            raise InputError(f"Parameter '{name}' has shape {list(tensor.shape)}, expected "
                             f"{list(expected[name].shape)}.", path=path)
        state[name] = tensor
    missing = sorted(set(expected) - set(state))
    if missing:
        raise InputError(f"Checkpoint {path} lacks parameter(s) {', '.join(missing)}.", path=path)
    model.load_state_dict(state)
    model.eval()
    model.history = payload.get("training", [])
    logger.info("Loaded model checkpoint.", extra={'path': path, 'sha256': stored_digest})
    return model
