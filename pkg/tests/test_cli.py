import json
import os

import pytest

from convsearch import create_cli
from convsearch.checkpoint import load_checkpoint
from convsearch.preproc import normalize
from convsearch.trec_io import read_examples


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("CONVSEARCH_"):
            monkeypatch.delenv(name)


@pytest.fixture
def main():
    return create_cli()


def _files(directory):
    found = {}
    for root, _, names in os.walk(directory):
        for name in names:
            path = os.path.join(root, name)
            with open(path, "rb") as f:
                found[os.path.relpath(path, directory)] = f.read()
    return found


def test_help_and_version(main):
    assert main(["--help"]) == 0
    assert main(["--version"]) == 0


def test_pipeline_outputs_are_byte_identical(tmp_path, toy_paths, main):
    for name in ("first", "second"):
        code = main(["--config", toy_paths["config"], "pipeline", "--variants", "original:cur,oracle,rm3:cur",
                     "-o", str(tmp_path / name)])
        assert code == 0
    first, second = _files(tmp_path / "first"), _files(tmp_path / "second")
    assert sorted(first) == sorted(second)
    assert "comparison.txt" in first
    for name in first:
        assert first[name] == second[name], name


def test_stage_commands_reproduce_pipeline_search(tmp_path, toy_paths, main):
    config = ["--config", toy_paths["config"]]
    index_dir, resolved = str(tmp_path / "index"), str(tmp_path / "resolved.jsonl")
    initial, reranked, fused = (str(tmp_path / f"{stage}.run") for stage in ("initial", "reranked", "fused"))

    assert main(config + ["index", "--index-dir", index_dir]) == 0
    assert main(config + ["resolve", "--variant", "oracle", "-o", resolved]) == 0
    assert main(config + ["search", "--index-dir", index_dir, "--resolved", resolved, "-o", initial]) == 0
    assert main(config + ["rerank", "--index-dir", index_dir, "--resolved", resolved, "--run", initial,
                          "-o", reranked]) == 0
    assert main(config + ["fuse", "--run", initial, "--run", reranked, "-o", fused]) == 0
    assert main(config + ["eval", "--run", fused, "--resolved", resolved, "-o", str(tmp_path / "reports")]) == 0
    assert main(config + ["pipeline", "--variants", "oracle", "-o", str(tmp_path / "out")]) == 0

    def run_lines(path):
        with open(path, encoding="utf-8") as f:
            return [line.split()[:5] for line in f]

    assert run_lines(initial) == run_lines(str(tmp_path / "out" / "oracle" / "initial.run"))
    with open(tmp_path / "reports" / "intrinsic.report.json", encoding="utf-8") as f:
        assert json.load(f)["means"]["f1"] == pytest.approx(1.0)
    assert (tmp_path / "reports" / "extrinsic.report.txt").is_file()


def test_label_train_and_resolve_with_model(tmp_path, toy_paths, main):
    config = ["--config", toy_paths["config"]]
    examples, stats = str(tmp_path / "gold.jsonl"), str(tmp_path / "stats.json")
    model = str(tmp_path / "model.json")

    assert main(config + ["label", "-o", examples, "--stats", stats]) == 0
    with open(stats, encoding="utf-8") as f:
        statistics = json.load(f)
    assert statistics["skipped"] == {"first_turn": 5}

    assert main(config + ["train", "--train", examples, "--dev", examples, "--model", model,
                          "--max-epochs", "1"]) == 0
    assert os.path.isfile(model)

    resolved, predictions = str(tmp_path / "resolved.jsonl"), str(tmp_path / "predictions.jsonl")
    assert main(config + ["resolve", "--variant", "quretec", "--model", model, "-o", resolved,
                          "--predictions", predictions]) == 0
    with open(resolved, encoding="utf-8") as f:
        assert len(f.readlines()) == 20
    with open(predictions, encoding="utf-8") as f:
        records = [json.loads(line) for line in f]
    assert records
    for record in records:
        assert set(record) == {"topic_id", "turn", "terms", "scores"}
        assert record["terms"] == sorted(record["terms"])
        assert list(record["scores"]) == sorted(record["scores"])
        assert set(record["terms"]) <= set(record["scores"])


def test_distant_labels_from_relevant_passage(tmp_path, saosin_topic, saosin_passages, main):
    topics, corpus = tmp_path / "topics.jsonl", tmp_path / "corpus.tsv"
    record = {"topic_id": saosin_topic.topic_id, "turns": [
        {"turn": t.turn_index, "query": t.query, "relevant_passages": list(t.relevant_passage_ids)}
        for t in saosin_topic.turns
    ]}
    topics.write_text(json.dumps(record) + "\n", encoding="utf-8")
    corpus.write_text("".join(f"{pid}\t{text}\n" for pid, text in saosin_passages.items()), encoding="utf-8")
    output = str(tmp_path / "distant.jsonl")

    assert main(["label", "--topics", str(topics), "--corpus", str(corpus), "--mode", "distant", "-o", output]) == 0
    examples = read_examples(output)
    assert [example.turn for example in examples] == [4]
    assert {normalize(w) for w in ("saosin", "first", "band")} <= examples[0].positive_terms()


def test_train_with_fraction_warm_start_and_grid(tmp_path, toy_paths, main, capsys):
    config = ["--config", toy_paths["config"]]
    examples = str(tmp_path / "gold.jsonl")
    assert main(config + ["label", "-o", examples]) == 0

    base, tuned, searched = (str(tmp_path / f"{name}.json") for name in ("base", "tuned", "searched"))
    assert main(config + ["train", "--train", examples, "--dev", examples, "--model", base,
                          "--fraction", "0.5", "--max-epochs", "1"]) == 0
    assert main(config + ["train", "--train", examples, "--dev", examples, "--model", tuned,
                          "--init-model", base, "--max-epochs", "1"]) == 0
    assert load_checkpoint(tuned).vocabulary.itos == load_checkpoint(base).vocabulary.itos

    capsys.readouterr()
    assert main(config + ["train", "--train", examples, "--dev", examples, "--model", searched,
                          "--grid", "--max-epochs", "1"]) == 0
    out = capsys.readouterr().out
    assert '"learning_rate": 3e-06' in out and '"dropout": 0.4' in out
    assert len(load_checkpoint(searched).history) == 1


def test_config_file_from_environment(tmp_path, toy_paths, main, monkeypatch, capsys):
    monkeypatch.setenv("CONVSEARCH_CONFIG", toy_paths["config"])
    assert main(["index", "--index-dir", str(tmp_path / "index")]) == 0
    assert "Indexed 50 passages" in capsys.readouterr().out


def test_user_errors_exit_with_one(tmp_path, toy_paths, main):
    assert main(["--config", str(tmp_path / "absent.txt"), "index", "--index-dir", str(tmp_path / "i")]) == 1
    assert main(["--config", toy_paths["config"], "search", "--resolved", toy_paths["topics"],
                 "--mu=-5", "-o", str(tmp_path / "r.run")]) == 1
    assert main(["--config", toy_paths["config"], "eval", "-o", str(tmp_path / "reports")]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["--config", toy_paths["config"], "resolve", "--variant", "quretec",
                 "-o", str(tmp_path / "r.jsonl")]) == 1


def test_log_level_option_is_case_insensitive(tmp_path, toy_paths, main, capsys):
    code = main(["--log-level", "warning", "--config", toy_paths["config"], "index",
                 "--index-dir", str(tmp_path / "index")])
    assert code == 0
    out = capsys.readouterr().out
    assert "Starting command." not in out
    assert "Indexed 50 passages" in out
