from __future__ import annotations

import json
from pathlib import Path

import pytest

from storychat.classifier import ClassifierConfig
from storychat.messages import ChatMessage, Source

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus() -> dict:
    return json.loads((FIXTURES / "corpus.json").read_text())


@pytest.fixture(scope="session")
def corpus_config(corpus) -> ClassifierConfig:
    return ClassifierConfig.from_dict(corpus["config"])


def make_message(
    body: str,
    *,
    t: int = 0,
    message_id: str = "m-1",
    author: str = "alice",
    source: Source = Source.EXTERNAL,
) -> ChatMessage:
    return ChatMessage(
        id=message_id,
        channel="#chan",
        author=author,
        body=body,
        timestamp_ms=t,
        source=source,
    )
