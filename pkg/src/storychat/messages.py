"""Core chat domain types shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any


class Source(Enum):
    """Where a chat message entered the system."""

    PARTICIPANT = "participant"
    EXTERNAL = "external"
    REPLAY = "replay"
    SYNTHETIC = "synthetic"

    @property
    def merge_rank(self) -> int:
        # Tie-break order for equal timestamps: participant < external < replay < synthetic.
        return _MERGE_RANK[self]

    @classmethod
    def from_token(cls, token: str) -> "Source":
        try:
            return cls(token.lower())
        except ValueError:
            raise ValueError(f"unknown source token: {token!r}") from None


_MERGE_RANK = {
    Source.PARTICIPANT: 0,
    Source.EXTERNAL: 1,
    Source.REPLAY: 2,
    Source.SYNTHETIC: 3,
}


@dataclass(frozen=True)
class ChatMessage:
    """One normalized chat event. Immutable; safe to share across tasks.

    timestamp_ms is milliseconds since session start, assigned at ingestion,
    and non-decreasing within a single source.
    """

    id: str
    channel: str
    author: str
    body: str
    timestamp_ms: int
    source: Source

    def __post_init__(self) -> None:
        if self.timestamp_ms < 0:
            raise ValueError(f"timestamp_ms must be >= 0, got {self.timestamp_ms}")
        if not self.body:
            raise ValueError("ChatMessage body must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "channel": self.channel,
            "author": self.author,
            "body": self.body,
            "timestamp_ms": self.timestamp_ms,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChatMessage":
        return cls(
            id=str(data["id"]),
            channel=str(data.get("channel", "")),
            author=str(data.get("author", "")),
            body=str(data["body"]),
            timestamp_ms=int(data["timestamp_ms"]),
            source=Source.from_token(str(data.get("source", "external"))),
        )


def merge_key(message: ChatMessage) -> tuple[int, int, str]:
    """Total order used by the merge point: timestamp, source rank, then id."""
    return (message.timestamp_ms, message.source.merge_rank, message.id)
