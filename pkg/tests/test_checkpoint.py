import json

import pytest
import torch

from convsearch.checkpoint import load_checkpoint, save_checkpoint
from convsearch.encoder import EncoderConfig
from convsearch.error import InputError
from convsearch.resolver import TrainConfig, collate, train
from convsearch.supervision import label_topic


@pytest.fixture
def trained_model(saosin_topic):
    examples = label_topic(saosin_topic, "gold").examples
    model_config = EncoderConfig(vocab_size=4, embed_dim=8, layers=1, heads=2, max_len=32, dropout_rate=0.1)
    return train(examples, examples, model_config, TrainConfig(max_epochs=2, patience=2)), examples


def test_checkpoint_round_trip(tmp_path, trained_model):
    model, examples = trained_model
    path = str(tmp_path / "model.json")
    digest = save_checkpoint(model, path)
    loaded = load_checkpoint(path)

    assert len(digest) == 64
    assert loaded.config == model.config
    assert loaded.vocabulary.itos == model.vocabulary.itos
    assert loaded.history == model.history
    assert not loaded.training
    ids, padding_mask, _, _ = collate(model, examples)
    model.eval()
    with torch.no_grad():
        assert torch.equal(model(ids, padding_mask), loaded(ids, padding_mask))


def test_saving_twice_is_byte_identical(tmp_path, trained_model):
    model, _ = trained_model
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(model, str(first))
    save_checkpoint(model, str(second))
    assert first.read_bytes() == second.read_bytes()


def _rewrite(path, change):
    payload = json.loads(path.read_text(encoding="utf-8"))
    change(payload)
    path.write_text(json.dumps(payload), encoding="utf-8")


def test_tampered_checkpoint_is_rejected(tmp_path, trained_model):
    model, _ = trained_model
    path = tmp_path / "model.json"
    save_checkpoint(model, str(path))
    _rewrite(path, lambda payload: payload["params"]["head.bias"]["data"].__setitem__(0, 42.0))
    with pytest.raises(InputError, match="hash"):
        load_checkpoint(str(path))


def test_unsupported_format_version_is_rejected(tmp_path, trained_model):
    model, _ = trained_model
    path = tmp_path / "model.json"
    save_checkpoint(model, str(path))
    _rewrite(path, lambda payload: payload.__setitem__("format_version", "2.0"))
    with pytest.raises(InputError, match="format"):
        load_checkpoint(str(path))


def test_missing_or_invalid_checkpoint(tmp_path):
    with pytest.raises(InputError):
        load_checkpoint(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(InputError):
        load_checkpoint(str(bad))
