from __future__ import annotations

import asyncio
import errno
import json
import time

import pytest

from storychat.messages import ChatMessage, Source
from storychat.sessionlog import (
    CorruptRecord,
    LogRecord,
    MissingManifest,
    Mode,
    RecordKind,
    SequenceGap,
    SessionLogWriter,
    SessionManifest,
    StorageFull,
    load,
    load_labels,
    replay,
)
from tests.conftest import make_message


def manifest(mode: Mode = Mode.WITH_STORY) -> SessionManifest:
    return SessionManifest(
        session_id="test-session",
        started_at="2026-01-01T00:00:00+00:00",
        mode=mode,
        configs={"detector": {"window_ms": 10_000}},
        stream_meta={"channel": "#chan", "nominal_viewers": 10_000},
    )


def comment_record(seq: int, t: int, body: str = "hi", negative: bool = False) -> LogRecord:
    message = make_message(body, t=t, message_id=f"c-{seq}")
    return LogRecord(
        seq=seq,
        timestamp_ms=t,
        kind=RecordKind.COMMENT,
        payload={
            "message": message.to_dict(),
            "classification": {
                "label": "negative" if negative else "not_negative",
                "fired": [],
                "metrics": {},
            },
        },
    )


class TestAppendLoad:
    def test_two_records_round_trip(self, tmp_path):
        path = tmp_path / "s.jsonl"
        with SessionLogWriter(path, manifest()) as writer:
            writer.append(comment_record(1, 100))
            writer.append(comment_record(2, 200))
        loaded_manifest, records = load(path)
        assert loaded_manifest == manifest()
        assert [r.seq for r in records] == [1, 2]

    def test_sequence_gap_rejected(self, tmp_path):
        with SessionLogWriter(tmp_path / "s.jsonl", manifest()) as writer:
            writer.append(comment_record(1, 100))
            with pytest.raises(SequenceGap):
                writer.append(comment_record(3, 200))

    def test_ten_thousand_records_round_trip(self, tmp_path):
        path = tmp_path / "big.jsonl"
        with SessionLogWriter(path, manifest()) as writer:
            for n in range(1, 10_001):
                writer.append(comment_record(n, n * 7, body=f"msg {n}"))
        _, records = load(path)
        assert len(records) == 10_000
        assert [r.seq for r in records] == list(range(1, 10_001))
        original = [comment_record(n, n * 7, body=f"msg {n}") for n in range(1, 10_001)]
        assert records == original

    def test_empty_file_missing_manifest(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(MissingManifest):
            load(path)

    def test_non_manifest_first_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(comment_record(1, 0).to_dict()) + "\n")
        with pytest.raises(MissingManifest):
            load(path)

    def test_truncated_final_line_isolated(self, tmp_path):
        path = tmp_path / "trunc.jsonl"
        with SessionLogWriter(path, manifest()) as writer:
            for n in range(1, 6):
                writer.append(comment_record(n, n * 10))
        text = path.read_text()
        path.write_text(text[: text.rstrip("\n").rfind("\n") + 20])  # chop mid-record
        with pytest.raises(CorruptRecord) as excinfo:
            load(path)
        assert excinfo.value.line_number == 6  # manifest + 4 intact + bad line
        assert [r.seq for r in excinfo.value.records] == [1, 2, 3, 4]

    def test_seq_gap_in_file_reported_with_line(self, tmp_path):
        path = tmp_path / "gap.jsonl"
        lines = [
            json.dumps(manifest().to_dict()),
            json.dumps(comment_record(1, 10).to_dict()),
            json.dumps(comment_record(5, 20).to_dict()),
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptRecord) as excinfo:
            load(path)
        assert excinfo.value.line_number == 3
        assert len(excinfo.value.records) == 1

    def test_timestamp_regression_in_file_rejected(self, tmp_path):
        path = tmp_path / "reg.jsonl"
        lines = [
            json.dumps(manifest().to_dict()),
            json.dumps(comment_record(1, 100).to_dict()),
            json.dumps(comment_record(2, 50).to_dict()),
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptRecord):
            load(path)

    def test_storage_full_surfaced(self, tmp_path, monkeypatch):
        writer = SessionLogWriter(tmp_path / "full.jsonl", manifest())

        def explode(_text):
            raise OSError(errno.ENOSPC, "no space left on device")

        monkeypatch.setattr(writer._file, "write", explode)
        with pytest.raises(StorageFull):
            writer.append(comment_record(1, 10))

    def test_flush_policy_covers_small_batches(self, tmp_path):
        path = tmp_path / "flush.jsonl"
        writer = SessionLogWriter(path, manifest())
        for n in range(1, 101):  # hits the 100-record flush threshold
            writer.append(comment_record(n, n))
        _, records = load(path)
        assert len(records) == 100
        writer.close()


class TestReplay:
    def make_records(self, times: list[int]) -> list[LogRecord]:
        return [comment_record(n, t) for n, t in enumerate(times, start=1)]

    def test_speed_one_preserves_deltas(self):
        records = self.make_records([0, 100, 200, 300])
        arrivals: list[float] = []

        def sink(_message: ChatMessage) -> None:
            arrivals.append(time.monotonic())

        asyncio.run(replay(records, 1.0, sink))
        deltas = [b - a for a, b in zip(arrivals, arrivals[1:])]
        assert len(deltas) == 3
        for delta in deltas:
            assert 0.06 <= delta <= 0.25  # 100ms nominal, scheduler slack

    def test_speed_100_compresses_wall_time(self):
        records = self.make_records([0, 500, 1000, 1500, 2000])
        start = time.monotonic()
        asyncio.run(replay(records, 100.0, lambda m: None))
        elapsed = time.monotonic() - start
        assert elapsed < 0.4  # 2s of logical time at 100x

    def test_messages_retagged_and_timestamps_kept(self):
        records = self.make_records([10, 20])
        received: list[ChatMessage] = []
        asyncio.run(replay(records, 1000.0, received.append))
        assert [m.timestamp_ms for m in received] == [10, 20]
        assert all(m.source is Source.REPLAY for m in received)
        assert [m.id for m in received] == ["c-1", "c-2"]

    def test_only_comments_re_emitted(self):
        records = self.make_records([10, 20])
        records.append(
            LogRecord(seq=3, timestamp_ms=30, kind=RecordKind.VERDICT, payload={"window_end_ms": 30})
        )
        records.append(
            LogRecord(seq=4, timestamp_ms=30, kind=RecordKind.TRANSITION, payload={"kind": "state_changed"})
        )
        received: list[ChatMessage] = []
        asyncio.run(replay(records, 1000.0, received.append))
        assert len(received) == 2

    def test_watermarks_cover_session_end(self):
        # Last record is a verdict after the final comment; watermarks must
        # reach it so a replayed pipeline recomputes the trailing windows.
        records = self.make_records([10, 20])
        records.append(
            LogRecord(seq=3, timestamp_ms=10_000, kind=RecordKind.VERDICT, payload={})
        )
        marks: list[int] = []
        asyncio.run(replay(records, 10_000.0, lambda m: None, watermark=marks.append))
        assert marks[-1] == 10_000
        assert marks == sorted(marks)

    def test_watermark_never_overtakes_next_message(self):
        records = self.make_records([500, 2500, 2600])
        order: list[tuple[str, int]] = []
        asyncio.run(
            replay(
                records,
                10_000.0,
                lambda m: order.append(("msg", m.timestamp_ms)),
                watermark=lambda t: order.append(("mark", t)),
            )
        )
        logical = [t for _, t in order]
        assert logical == sorted(logical)
        for kind, t in order:
            if kind == "mark":
                later_msgs = [u for k, u in order if k == "msg" and u < t]
                # every message earlier than a mark must already be emitted
                assert all(
                    order.index(("msg", u)) < order.index((kind, t)) for u in later_msgs
                )

    def test_invalid_speed_rejected(self):
        with pytest.raises(ValueError):
            asyncio.run(replay([], 0.0, lambda m: None))


class TestLabels:
    def test_load_labels(self, tmp_path):
        path = tmp_path / "s.labels.jsonl"
        path.write_text(
            '{"id": "c-1", "label": "prosocial"}\n{"id": "c-2", "label": "neutral"}\n'
        )
        assert load_labels(path) == {"c-1": "prosocial", "c-2": "neutral"}

    def test_unknown_label_rejected(self, tmp_path):
        path = tmp_path / "bad.labels.jsonl"
        path.write_text('{"id": "c-1", "label": "sarcastic"}\n')
        with pytest.raises(Exception):
            load_labels(path)
