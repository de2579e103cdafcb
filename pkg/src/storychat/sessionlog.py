"""Append-only session logs with deterministic, time-scalable replay.

Format: JSON Lines. The first line is the session manifest (config snapshot,
mode, stream metadata); every following line is one LogRecord. Line-delimited
JSON keeps corruption isolated to a single record and supports streaming
writes at chat rates.

Replay re-emits only Comment records; verdicts and transitions are recomputed
by the pipeline downstream, which is what makes old-vs-new regression
comparison possible.
"""

from __future__ import annotations

import asyncio
import errno
import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Awaitable, Callable, Iterable, Optional, Union

from .messages import ChatMessage, Source


class Mode(Enum):
    WITH_STORY = "with_story"
    WITHOUT_STORY = "without_story"

    @classmethod
    def from_token(cls, token: str) -> "Mode":
        normalized = token.strip().lower().replace("-", "_")
        if normalized in ("with_story", "withstory"):
            return cls.WITH_STORY
        if normalized in ("without_story", "withoutstory"):
            return cls.WITHOUT_STORY
        raise ValueError(f"unknown mode token: {token!r}")


class RecordKind(Enum):
    COMMENT = "comment"
    VERDICT = "verdict"
    TRANSITION = "transition"
    ADMIN = "admin"
    NOTICE = "notice"


class SessionLogError(Exception):
    """Base class for session log failures."""


class SequenceGap(SessionLogError):
    """Appended record's seq is not exactly last seq + 1."""


class StorageFull(SessionLogError):
    """Underlying storage ran out of space."""


class MissingManifest(SessionLogError):
    """File empty or first line is not a manifest."""


class CorruptRecord(SessionLogError):
    """A record line failed to parse or violated log invariants.

    Carries the 1-based line number plus everything read successfully before
    the bad line, so callers can keep the intact prefix.
    """

    def __init__(self, line_number: int, reason: str, manifest: "SessionManifest",
                 records: list["LogRecord"]):
        super().__init__(f"corrupt record at line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason
        self.manifest = manifest
        self.records = records


@dataclass(frozen=True)
class LogRecord:
    seq: int
    timestamp_ms: int
    kind: RecordKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp_ms": self.timestamp_ms,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LogRecord":
        return cls(
            seq=int(data["seq"]),
            timestamp_ms=int(data["timestamp_ms"]),
            kind=RecordKind(data["kind"]),
            payload=dict(data.get("payload", {})),
        )


@dataclass(frozen=True)
class SessionManifest:
    session_id: str
    started_at: str  # RFC 3339 wall-clock text
    mode: Mode
    configs: dict[str, Any]  # classifier / detector / fsm snapshots
    stream_meta: dict[str, Any]  # {channel, nominal_viewers}

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "manifest",
            "session_id": self.session_id,
            "started_at": self.started_at,
            "mode": self.mode.value,
            "configs": self.configs,
            "stream_meta": self.stream_meta,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SessionManifest":
        return cls(
            session_id=str(data["session_id"]),
            started_at=str(data["started_at"]),
            mode=Mode.from_token(str(data["mode"])),
            configs=dict(data.get("configs", {})),
            stream_meta=dict(data.get("stream_meta", {})),
        )


FLUSH_EVERY_RECORDS = 100
FLUSH_EVERY_SECONDS = 1.0


class SessionLogWriter:
    """Single-writer appender. Flushes at least every 100 records or 1 second."""

    def __init__(self, path: Union[str, Path], manifest: SessionManifest) -> None:
        self.path = Path(path)
        self.manifest = manifest
        self._file = open(self.path, "w", encoding="utf-8")
        self._last_seq = 0
        self._last_ts = 0
        self._unflushed = 0
        self._last_flush = time.monotonic()
        self._write_line(json.dumps(manifest.to_dict(), separators=(",", ":")))
        self._flush()

    def _write_line(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise

    def _flush(self) -> None:
        self._file.flush()
        self._unflushed = 0
        self._last_flush = time.monotonic()

    @property
    def next_seq(self) -> int:
        return self._last_seq + 1

    @property
    def last_timestamp_ms(self) -> int:
        return self._last_ts

    def append(self, record: LogRecord) -> None:
        if record.seq != self._last_seq + 1:
            raise SequenceGap(f"expected seq {self._last_seq + 1}, got {record.seq}")
        # Engine guarantees monotone timestamps; clamp defensively so the file
        # invariant holds even if a caller slips.
        ts = max(record.timestamp_ms, self._last_ts)
        if ts != record.timestamp_ms:
            record = LogRecord(record.seq, ts, record.kind, record.payload)
        self._write_line(json.dumps(record.to_dict(), separators=(",", ":")))
        self._last_seq = record.seq
        self._last_ts = ts
        self._unflushed += 1
        if self._unflushed >= FLUSH_EVERY_RECORDS or time.monotonic() - self._last_flush >= FLUSH_EVERY_SECONDS:
            self._flush()

    def close(self) -> None:
        if not self._file.closed:
            self._flush()
            self._file.close()

    def __enter__(self) -> "SessionLogWriter":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def load(path: Union[str, Path]) -> tuple[SessionManifest, list[LogRecord]]:
    """Read a session file, validating seq continuity and timestamp order."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip():
        raise MissingManifest(f"{path}: no manifest line")
    try:
        head = json.loads(lines[0])
        if not isinstance(head, dict) or head.get("kind") != "manifest":
            raise ValueError("first line is not a manifest object")
        manifest = SessionManifest.from_dict(head)
    except (ValueError, KeyError) as exc:
        raise MissingManifest(f"{path}: {exc}") from exc

    records: list[LogRecord] = []
    last_seq = 0
    last_ts = 0
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = LogRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(line_no, f"unparseable record ({exc})", manifest, records) from exc
        if record.seq != last_seq + 1:
            raise CorruptRecord(
                line_no, f"seq {record.seq} after {last_seq}", manifest, records
            )
        if record.timestamp_ms < last_ts:
            raise CorruptRecord(
                line_no,
                f"timestamp {record.timestamp_ms} regressed below {last_ts}",
                manifest,
                records,
            )
        records.append(record)
        last_seq = record.seq
        last_ts = record.timestamp_ms
    return manifest, records


def comment_message(record: LogRecord) -> ChatMessage:
    """The ChatMessage stored in a Comment record, as originally logged."""
    return ChatMessage.from_dict(record.payload["message"])


Sink = Callable[[ChatMessage], Union[None, Awaitable[None]]]
Watermark = Callable[[int], Union[None, Awaitable[None]]]


async def _call(fn: Callable[..., Union[None, Awaitable[None]]], *args: Any) -> None:
    result = fn(*args)
    if asyncio.iscoroutine(result):
        await result


async def paced_emit(
    messages: list[ChatMessage],
    speed: float,
    sink: Sink,
    *,
    watermark: Optional[Watermark] = None,
    watermark_interval_ms: int = 1000,
    end_ms: Optional[int] = None,
) -> None:
    """Emit time-ordered messages with wall delays = logical deltas / speed.

    Watermarks report logical time progress at k * watermark_interval_ms,
    strictly between message timestamps (a watermark equal to a message's
    timestamp fires after that message), so a logical-time consumer sees
    the identical event order at any speed. A final watermark at end_ms
    closes out the session.
    """
    if speed <= 0:
        raise ValueError(f"speed must be > 0, got {speed}")
    if end_ms is None:
        end_ms = messages[-1].timestamp_ms if messages else 0

    now_ms = 0

    async def advance(target_ms: int) -> None:
        nonlocal now_ms
        if target_ms > now_ms:
            await asyncio.sleep((target_ms - now_ms) / speed / 1000.0)
            now_ms = target_ms

    next_mark = watermark_interval_ms
    for message in messages:
        t = message.timestamp_ms
        while watermark is not None and next_mark < t:
            await advance(next_mark)
            await _call(watermark, next_mark)
            next_mark += watermark_interval_ms
        await advance(t)
        await _call(sink, message)
    while watermark is not None and next_mark < end_ms:
        await advance(next_mark)
        await _call(watermark, next_mark)
        next_mark += watermark_interval_ms
    if watermark is not None:
        await advance(end_ms)
        await _call(watermark, end_ms)


async def replay(
    records: Iterable[LogRecord],
    speed: float,
    sink: Sink,
    *,
    watermark: Optional[Watermark] = None,
    watermark_interval_ms: int = 1000,
) -> None:
    """Re-emit Comment records with inter-record delays scaled by 1/speed.

    Messages keep their original logical timestamps (and ids) but are
    re-tagged source=replay. Verdict/Transition/Admin/Notice records are never
    re-emitted; the receiving pipeline recomputes them.
    """
    all_records = list(records)
    comments = [r for r in all_records if r.kind is RecordKind.COMMENT]
    # The session's logical end is the last record of any kind, so boundaries
    # and ticks the original session fired after its final comment replay too.
    end_ms = all_records[-1].timestamp_ms if all_records else 0
    replayed = []
    for record in comments:
        original = comment_message(record)
        replayed.append(
            ChatMessage(
                id=original.id,
                channel=original.channel,
                author=original.author,
                body=original.body,
                timestamp_ms=original.timestamp_ms,
                source=Source.REPLAY,
            )
        )
    await paced_emit(
        replayed,
        speed,
        sink,
        watermark=watermark,
        watermark_interval_ms=watermark_interval_ms,
        end_ms=end_ms,
    )


VALID_OVERLAY_LABELS = frozenset({"prosocial", "negative", "neutral"})


def load_labels(path: Union[str, Path]) -> dict[str, str]:
    """Sidecar label overlay: one {id, label} JSON object per line."""
    labels: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            message_id = str(entry["id"])
            label = str(entry["label"])
        except (ValueError, KeyError, TypeError) as exc:
            raise SessionLogError(f"{path}:{line_no}: bad label entry ({exc})") from exc
        if label not in VALID_OVERLAY_LABELS:
            raise SessionLogError(f"{path}:{line_no}: unknown label {label!r}")
        labels[message_id] = label
    return labels
