import json

import pytest

from convsearch.error import InputError
from convsearch.evaluation import Qrels
from convsearch.retrieval import RankedList
from convsearch.supervision import label_topic
from convsearch.trec_io import (
    read_corpus,
    read_examples,
    read_qrels,
    read_run,
    read_topics,
    topic_to_json,
    write_examples,
    write_qrels,
    write_run,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_read_toy_inputs(toy_paths):
    topics = read_topics(toy_paths["topics"])
    corpus = read_corpus(toy_paths["corpus"])
    qrels = read_qrels(toy_paths["qrels"])
    assert [t.topic_id for t in topics] == ["t1", "t2", "t3", "t4", "t5"]
    assert all(len(t.turns) == 4 for t in topics)
    assert len(corpus) == 50
    assert len(qrels.query_ids()) == 20
    ids = {p.id for p in corpus}
    for topic in topics:
        for turn in topic.turns:
            assert set(turn.relevant_passage_ids) <= ids
            assert turn.gold_rewrite


def test_topic_json_round_trip(tmp_path, toy_paths):
    topics = read_topics(toy_paths["topics"])
    path = _write(tmp_path / "topics.jsonl", "".join(json.dumps(topic_to_json(t)) + "\n" for t in topics))
    assert read_topics(path) == topics


@pytest.mark.parametrize("line", [
    '{"turns": []}',
    '{"topic_id": "a", "turns": [{"turn": 2, "query": "x"}]}',
    '{"topic_id": "a", "turns": [{"turn": 1}]}',
    '{"topic_id": "a", "turns": [{"turn": 1, "query": "x", "answer": {"text": "abc", "start": 2, "end": 9}}]}',
    'not json',
])
def test_read_topics_rejects_malformed_records(tmp_path, line):
    with pytest.raises(InputError):
        read_topics(_write(tmp_path / "topics.jsonl", line + "\n"))


def test_read_topics_rejects_duplicate_topic_ids(tmp_path):
    line = '{"topic_id": "a", "turns": [{"turn": 1, "query": "x"}]}\n'
    with pytest.raises(InputError) as excinfo:
        read_topics(_write(tmp_path / "topics.jsonl", line + line))
    assert excinfo.value.context["line"] == 2


def test_read_corpus_errors(tmp_path):
    with pytest.raises(InputError):
        read_corpus(_write(tmp_path / "a.tsv", "p1\tone\np1\ttwo\n"))
    with pytest.raises(InputError):
        read_corpus(_write(tmp_path / "b.tsv", "p1 no tab here\n"))
    with pytest.raises(InputError):
        read_corpus(str(tmp_path / "missing.tsv"))


def test_read_corpus_keeps_tabs_inside_text(tmp_path):
    corpus = read_corpus(_write(tmp_path / "c.tsv", "p1\tone\ttwo\n\n"))
    assert [(p.id, p.text) for p in corpus] == [("p1", "one\ttwo")]


def test_qrels_round_trip(tmp_path):
    qrels = Qrels()
    qrels.add("q2", "b", 0)
    qrels.add("q1", "a", 2)
    path = str(tmp_path / "qrels.txt")
    write_qrels(path, qrels)
    assert read_qrels(path).judgments == qrels.judgments


def test_read_qrels_rejects_bad_lines(tmp_path):
    with pytest.raises(InputError):
        read_qrels(_write(tmp_path / "q1.txt", "q1 0 a\n"))
    with pytest.raises(InputError):
        read_qrels(_write(tmp_path / "q2.txt", "q1 0 a -1\n"))


def test_run_file_format(tmp_path):
    path = str(tmp_path / "run.trec")
    write_run(path, [
        RankedList("q2", (("b", 0.5),)),
        RankedList("q1", (("a", -1.25), ("c", -2.0))),
    ], "demo")
    with open(path, encoding="utf-8") as f:
        assert f.read() == (
            "q1 Q0 a 1 -1.250000 demo\n"
            "q1 Q0 c 2 -2.000000 demo\n"
            "q2 Q0 b 1 0.500000 demo\n"
        )
    runs = read_run(path)
    assert runs["q1"].passage_ids() == ["a", "c"]


def test_write_run_rejects_bad_tag(tmp_path):
    with pytest.raises(InputError):
        write_run(str(tmp_path / "run.trec"), [], "two words")


def test_read_run_rejects_duplicates(tmp_path):
    with pytest.raises(InputError):
        read_run(_write(tmp_path / "run.trec", "q1 Q0 a 1 1.0 x\nq1 Q0 a 2 0.5 x\n"))


def test_examples_round_trip(tmp_path, saosin_topic):
    examples = label_topic(saosin_topic, "gold").examples
    path = str(tmp_path / "examples.jsonl")
    write_examples(path, examples)
    assert read_examples(path) == examples
