import json
import os

import pytest

from convsearch.config import load_config
from convsearch.pipeline import (
    Resolution,
    read_resolutions,
    resolve_topics,
    run_pipeline,
    variant_slug,
    write_resolutions,
)
from convsearch.trec_io import read_corpus, read_qrels, read_run, read_topics


@pytest.fixture
def toy(toy_paths):
    return {
        "topics": read_topics(toy_paths["topics"]),
        "corpus": read_corpus(toy_paths["corpus"]),
        "qrels": read_qrels(toy_paths["qrels"]),
    }


def _config(toy_paths, output_dir, variants):
    return load_config(toy_paths["config"], overrides={"output_dir": str(output_dir), "variants": variants},
                       environ={})


@pytest.fixture
def toy_results(tmp_path, toy_paths, toy):
    config = _config(toy_paths, tmp_path / "out", "original:cur,oracle")
    results = run_pipeline(config, toy["topics"], toy["corpus"], toy["qrels"])
    return results, tmp_path / "out"


def test_oracle_rewrites_find_every_relevant_passage(toy_results):
    results, _ = toy_results
    oracle = results["oracle"]["reports"]["initial"]
    assert oracle.counts["included"] == 20
    assert oracle.means["recall"] == pytest.approx(1.0)


def test_oracle_beats_current_turn_only_on_ndcg(toy_results):
    results, _ = toy_results
    for stage in ("initial", "fused"):
        oracle = results["oracle"]["reports"][stage].means["ndcg@3"]
        current = results["original:cur"]["reports"][stage].means["ndcg@3"]
        assert oracle > current


def test_oracle_intrinsic_scores_are_perfect(toy_results):
    results, _ = toy_results
    intrinsic = results["oracle"]["intrinsic"]
    assert intrinsic.counts["included"] == 15
    assert intrinsic.means["f1"] == pytest.approx(1.0)
    assert results["original:cur"]["intrinsic"].means["recall"] == pytest.approx(0.0)


def test_output_layout(toy_results):
    _, out = toy_results
    for variant in ("original:cur", "oracle"):
        variant_dir = out / variant_slug(variant)
        assert (variant_dir / "resolved.jsonl").is_file()
        for stage in ("initial", "reranked", "fused"):
            assert (variant_dir / f"{stage}.run").is_file()
            assert (variant_dir / f"{stage}.report.json").is_file()
            assert (variant_dir / f"{stage}.report.txt").is_file()
        assert (variant_dir / "intrinsic.report.json").is_file()
    comparison = (out / "comparison.txt").read_text(encoding="utf-8")
    assert comparison.startswith("# baseline = original:cur\n")
    assert not any(name.startswith(".tmp-") for name in os.listdir(out.parent))


def test_reports_carry_config_and_input_hashes(tmp_path, toy_paths, toy):
    config = _config(toy_paths, tmp_path / "out", "original:cur,oracle")
    inputs = {key: getattr(config, key) for key in ("corpus", "topics", "qrels")}
    run_pipeline(config, toy["topics"], toy["corpus"], toy["qrels"], inputs=inputs)
    with open(tmp_path / "out" / "oracle" / "initial.report.json", encoding="utf-8") as f:
        report = json.load(f)
    header = report["header"]
    assert header["variant"] == "oracle"
    assert header["stage"] == "initial"
    assert header["config"]["mu"] == config.mu
    assert "output_dir" not in header["config"]
    assert sorted(header["inputs"]) == ["corpus", "qrels", "topics"]
    assert "comparison" in report


def test_run_files_are_sorted_and_fused_keeps_initial_passages(toy_results):
    _, out = toy_results
    initial = read_run(str(out / "oracle" / "initial.run"))
    fused = read_run(str(out / "oracle" / "fused.run"))
    assert list(initial) == sorted(initial)
    for query_id, ranked in initial.items():
        assert set(fused[query_id].passage_ids()) == set(ranked.passage_ids())


def test_all_toy_variants_run(tmp_path, toy_paths, toy):
    config = load_config(toy_paths["config"], overrides={"output_dir": str(tmp_path / "out")}, environ={})
    results = run_pipeline(config, toy["topics"], toy["corpus"], toy["qrels"])
    assert list(results) == config.variant_list()
    everything = results["original:all"]["intrinsic"]
    assert everything.means["recall"] == pytest.approx(1.0)


def test_resolutions_round_trip(tmp_path, toy_paths, toy):
    config = _config(toy_paths, tmp_path / "out", "oracle")
    resolutions = resolve_topics(toy["topics"], "oracle", config)
    path = str(tmp_path / "resolved.jsonl")
    write_resolutions(path, resolutions)
    loaded = read_resolutions(path)
    assert [r.query_id for r in loaded] == [r.query_id for r in resolutions]
    assert all(isinstance(r, Resolution) for r in loaded)
    assert [r.expansion for r in loaded] == [r.expansion for r in resolutions]
