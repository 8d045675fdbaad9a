"""
Readers and writers for every file format the pipeline exchanges.

- Topics: JSON-lines, one conversation per line.
- Corpus: TSV, `passage_id<TAB>text`.
- Qrels: whitespace-delimited `query_id 0 passage_id grade`.
- Runs: `query_id Q0 passage_id rank score tag`, scores with 6 decimals.
- Labeled examples, resolved queries and predictions: JSON-lines.

Readers validate the whole file before returning, and writers go through
`utils.files.atomic_write`, so no command writes output from half-read input
or leaves half-written output behind.
"""
import json
import logging

from convsearch.error import InputError
from convsearch.evaluation import Qrels
from convsearch.retrieval import Passage, RankedList
from convsearch.supervision import AnswerSpan, LabeledExample, Topic, Turn
from utils.files import atomic_write
from utils.validation import ensure_unique, parse_float, parse_int, require_fields

logger = logging.getLogger(__name__)

SCORE_DECIMALS = 6


def _open_lines(path):
    try:
        with open(path, encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                yield line_number, line.rstrip("\n").rstrip("\r")
    except FileNotFoundError:
        raise InputError(f"File not found: {path}", path=path)
    except UnicodeDecodeError as e:
        raise InputError(f"File is not valid UTF-8: {path} ({e})", path=path) from e


# --- JSON-lines ---
def read_jsonl(path):
    """Yields (line_number, record) for every non-blank line."""
    for line_number, line in _open_lines(path):
        if not line.strip():
            continue
        try:
            yield line_number, json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:{line_number}: invalid JSON ({e.msg}).", path=path, line=line_number) from e


def write_jsonl(path, records):
    """Writes one JSON object per line (sorted keys, UTF-8), atomically."""
    count = 0
    with atomic_write(path) as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            count += 1
    logger.debug("Wrote JSON-lines file.", extra={'path': path, 'records': count})
    return count


# --- Topics ---
def _parse_turn(raw, path, line_number):
    require_fields(raw, ("turn", "query"), path, line_number)
    turn_index = parse_int(raw["turn"], "turn", path, line_number, minimum=1)
    answer = None
    if raw.get("answer") is not None:
        require_fields(raw["answer"], ("text", "start", "end"), path, line_number)
        document = str(raw["answer"]["text"])
        start = parse_int(raw["answer"]["start"], "answer.start", path, line_number, minimum=0)
        end = parse_int(raw["answer"]["end"], "answer.end", path, line_number, minimum=0)
        if not start <= end <= len(document):
            raise InputError(
                f"{path}:{line_number}: answer offsets ({start}, {end}) outside a text of length {len(document)}.",
                path=path, line=line_number
            )
        answer = AnswerSpan(document, start, end)
    relevant = raw.get("relevant_passages") or []
    if not isinstance(relevant, list):
        raise InputError(f"{path}:{line_number}: relevant_passages must be a list.", path=path, line=line_number)
    return Turn(
        turn_index=turn_index,
        query=str(raw["query"]),
        gold_rewrite=raw.get("rewrite"),
        relevant_passage_ids=tuple(str(pid) for pid in relevant),
        answer_span=answer,
    )


def read_topics(path):
    """
    Parses a topics file.

    Returns:
        list of Topic: In file order.

    Raises:
        InputError: Malformed JSON, missing fields, duplicate topic ids or
            turn numbers that are not 1..n in order.
    """
    topics, seen = [], set()
    for line_number, record in read_jsonl(path):
        require_fields(record, ("topic_id", "turns"), path, line_number)
        topic_id = str(record["topic_id"])
        ensure_unique(topic_id, seen, "topic_id", path, line_number)
        if not isinstance(record["turns"], list):
            raise InputError(f"{path}:{line_number}: turns must be a list.", path=path, line=line_number)
        turns = tuple(_parse_turn(raw, path, line_number) for raw in record["turns"])
        try:
            topics.append(Topic(topic_id, turns))
        except InputError as e:
            raise InputError(f"{path}:{line_number}: {e}", path=path, line=line_number) from e
    logger.info("Read topics.", extra={'path': path, 'topics': len(topics)})
    return topics


def topic_to_json(topic):
    turns = []
    for turn in topic.turns:
        record = {"turn": turn.turn_index, "query": turn.query}
        if turn.gold_rewrite is not None:
            record["rewrite"] = turn.gold_rewrite
        if turn.relevant_passage_ids:
            record["relevant_passages"] = list(turn.relevant_passage_ids)
        if turn.answer_span is not None:
            span = turn.answer_span
            record["answer"] = {"text": span.document, "start": span.start, "end": span.end}
        turns.append(record)
    return {"topic_id": topic.topic_id, "turns": turns}


# --- Corpus ---
def read_corpus(path):
    """
    Parses a TSV corpus.

    Returns:
        list of Passage: In file order.

    Raises:
        InputError: A line without a tab, an empty id or a duplicate id.
    """
    passages, seen = [], set()
    for line_number, line in _open_lines(path):
        if not line.strip():
            continue
        if "\t" not in line:
            raise InputError(f"{path}:{line_number}: expected passage_id<TAB>text.", path=path, line=line_number)
        passage_id, text = line.split("\t", 1)
        passage_id = passage_id.strip()
        if not passage_id:
            raise InputError(f"{path}:{line_number}: empty passage id.", path=path, line=line_number)
        ensure_unique(passage_id, seen, "passage id", path, line_number)
        passages.append(Passage(passage_id, text))
    logger.info("Read corpus.", extra={'path': path, 'passages': len(passages)})
    return passages


# --- Qrels ---
def read_qrels(path):
    """Parses `query_id 0 passage_id grade` lines into Qrels."""
    qrels = Qrels()
    for line_number, line in _open_lines(path):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise InputError(
                f"{path}:{line_number}: expected 4 columns, got {len(fields)}.", path=path, line=line_number
            )
        query_id, _, passage_id, raw_grade = fields
        grade = parse_int(raw_grade, "grade", path, line_number, minimum=0)
        try:
            qrels.add(query_id, passage_id, grade)
        except InputError as e:
            raise InputError(f"{path}:{line_number}: {e}", path=path, line=line_number) from e
    logger.info("Read qrels.", extra={'path': path, 'queries': len(qrels.query_ids())})
    return qrels


def write_qrels(path, qrels):
    with atomic_write(path) as f:
        for query_id in qrels.query_ids():
            for passage_id in sorted(qrels.grades(query_id)):
                f.write(f"{query_id} 0 {passage_id} {qrels.grades(query_id)[passage_id]}\n")


# --- Runs ---
def format_run_line(query_id, passage_id, rank, score, tag):
    return f"{query_id} Q0 {passage_id} {rank} {score:.{SCORE_DECIMALS}f} {tag}\n"


def write_run(path, ranked_lists, tag):
    """
    Writes ranked lists in TREC run format.

    Args:
        path (str): Destination.
        ranked_lists (iterable of RankedList): Written in query id order.
        tag (str): Run tag (no whitespace).
    """
    if not tag or any(ch.isspace() for ch in tag):
        raise InputError(f"Run tag must be a non-empty token, got {tag!r}.", tag=tag)
    lists = sorted(ranked_lists, key=lambda ranked: ranked.query_id)
    with atomic_write(path) as f:
        for ranked in lists:
            for rank, (passage_id, score) in enumerate(ranked.entries, start=1):
                f.write(format_run_line(ranked.query_id, passage_id, rank, score, tag))
    logger.info("Wrote run file.", extra={'path': path, 'queries': len(lists), 'tag': tag})


def read_run(path):
    """
    Parses a TREC run file.

    Entries are re-sorted by descending score with ties on ascending passage
    id, which is the order every ranked list in the pipeline obeys.

    Returns:
        dict: Query id -> RankedList.
    """
    scores, seen = {}, set()
    for line_number, line in _open_lines(path):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise InputError(
                f"{path}:{line_number}: expected 6 columns, got {len(fields)}.", path=path, line=line_number
            )
        query_id, _, passage_id, raw_rank, raw_score, _ = fields
        parse_int(raw_rank, "rank", path, line_number, minimum=1)
        score = parse_float(raw_score, "score", path, line_number)
        ensure_unique((query_id, passage_id), seen, "run entry", path, line_number)
        scores.setdefault(query_id, {})[passage_id] = score
    return {query_id: RankedList.from_scores(query_id, per_query) for query_id, per_query in sorted(scores.items())}


# --- Labeled Examples ---
def write_examples(path, examples):
    return write_jsonl(path, (example.to_json() for example in examples))


def read_examples(path):
    examples = []
    for line_number, record in read_jsonl(path):
        try:
            examples.append(LabeledExample.from_json(record))
        except InputError as e:
            raise InputError(f"{path}:{line_number}: {e}", path=path, line=line_number) from e
    logger.info("Read labeled examples.", extra={'path': path, 'examples': len(examples)})
    return examples
