import logging
import os

import pytest

from convsearch import PACKAGE_LOGGER_NAME
from convsearch.supervision import Topic, Turn

TOY_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "toy")

SAOSIN_PASSAGE = (
    "The original lineup for Saosin, consisting of Burchell, Shekoski, Kennedy and Green, was formed in "
    "the summer of 2003. On June 17, the band released their first commercial production, the EP "
    "Translating the Name."
)


@pytest.fixture(autouse=True)
def reset_package_logging():
    """Commands install stream handlers bound to the captured stdout of one test."""
    yield
    logger = logging.getLogger(PACKAGE_LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def saosin_topic():
    """Four-turn dialogue whose last turn is rewritten with the band name."""
    return Topic("saosin", (
        Turn(1, "who formed saosin?"),
        Turn(2, "when was the band founded?"),
        Turn(3, "what was their first album?"),
        Turn(4, "when was the album released?", gold_rewrite="when was saosin 's first album released?",
             relevant_passage_ids=("saosin-p1",)),
    ))


@pytest.fixture
def saosin_passages():
    return {"saosin-p1": SAOSIN_PASSAGE}


@pytest.fixture
def database_topic():
    return Topic("databases", tuple(Turn(i, query) for i, query in enumerate([
        "What is a real-time database?",
        "How does it differ from traditional ones?",
        "What are the advantages of real-time processing?",
        "What are examples of important ones?",
        "What are important applications?",
        "What are important cloud options?",
        "Tell me about the Firebase DB?",
        "How is it used in mobile apps?",
    ], start=1)))


@pytest.fixture
def toy_paths():
    return {
        "corpus": os.path.join(TOY_DIR, "corpus.tsv"),
        "topics": os.path.join(TOY_DIR, "topics.jsonl"),
        "qrels": os.path.join(TOY_DIR, "qrels.txt"),
        "config": os.path.join(TOY_DIR, "config.txt"),
    }
