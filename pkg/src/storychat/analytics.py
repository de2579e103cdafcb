"""Batch measurement over session logs: counts, timelines, prosocial surge.

The engine only ever labels comments negative / not-negative; prosocial is a
manual judgment, supplied post hoc as a sidecar label overlay and never fed
back into engine behavior. Where the overlay contradicts the engine (a
comment marked prosocial that the engine classified negative), the engine's
negative count wins so the label partition stays exact.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any, Optional

from .sessionlog import LogRecord, Mode, RecordKind, SessionManifest, load, load_labels


class AnalyticsError(Exception):
    """Base class for analytics failures."""


class OverlayIdMismatch(AnalyticsError):
    """Overlay references message ids that are not in the log."""


class NotWithStory(AnalyticsError):
    """Timeline requested for a session that never ran the narrative."""


class NoSuchEvent(AnalyticsError):
    """No narrative entry into the requested state."""


class MissingOverlay(AnalyticsError):
    """Surge metric needs a label overlay."""


def _comments(records: list[LogRecord]) -> list[LogRecord]:
    return [r for r in records if r.kind is RecordKind.COMMENT]


def _is_negative(record: LogRecord) -> bool:
    return record.payload["classification"]["label"] == "negative"


def _message_id(record: LogRecord) -> str:
    return str(record.payload["message"]["id"])


def _prosocial_ids(comments: list[LogRecord], overlay: dict[str, str]) -> set[str]:
    # Prosocial labels apply to the comments the engine did not flag negative.
    return {
        _message_id(r)
        for r in comments
        if overlay.get(_message_id(r)) == "prosocial" and not _is_negative(r)
    }


def session_stats(
    records: list[LogRecord], overlay: Optional[dict[str, str]] = None
) -> dict[str, Any]:
    """Counts over Comment records; prosocial appears only with an overlay."""
    comments = _comments(records)
    ids = {_message_id(r) for r in comments}
    if overlay is not None:
        unknown = set(overlay) - ids
        if unknown:
            raise OverlayIdMismatch(
                f"{len(unknown)} overlay ids not in log (e.g. {sorted(unknown)[:3]})"
            )

    total = len(comments)
    negative = sum(1 for r in comments if _is_negative(r))

    per_source: dict[str, int] = {}
    for record in comments:
        source = str(record.payload["message"]["source"])
        per_source[source] = per_source.get(source, 0) + 1

    end_ms = records[-1].timestamp_ms if records else 0
    minutes = end_ms // 60_000 + 1 if records else 0
    per_minute = [{"minute": m, "total": 0, "negative": 0} for m in range(minutes)]
    for record in comments:
        bucket = per_minute[record.timestamp_ms // 60_000]
        bucket["total"] += 1
        if _is_negative(record):
            bucket["negative"] += 1

    stats: dict[str, Any] = {
        "total": total,
        "negative": negative,
        "per_source": per_source,
        "per_minute": per_minute,
    }
    if overlay is None:
        stats["neutral"] = total - negative
    else:
        prosocial = len(_prosocial_ids(comments, overlay))
        stats["prosocial"] = prosocial
        stats["neutral"] = total - negative - prosocial
    return stats


def timeline_from_state_changes(
    state_changes: list[tuple[str, int]], end_ms: int, start_state: str = "stable"
) -> list[dict[str, Any]]:
    """Contiguous state intervals covering [0, end_ms], starting at stable."""
    intervals: list[dict[str, Any]] = []
    current_state = start_state
    current_start = 0
    for state, at_ms in state_changes:
        if at_ms > current_start:
            intervals.append({"state": current_state, "enter_ms": current_start, "exit_ms": at_ms})
            current_start = at_ms
        current_state = state
    intervals.append({"state": current_state, "enter_ms": current_start, "exit_ms": end_ms})
    return intervals


def transition_timeline(
    manifest: SessionManifest, records: list[LogRecord]
) -> list[dict[str, Any]]:
    """State intervals for a with-story session, covering the full span."""
    if manifest.mode is not Mode.WITH_STORY:
        raise NotWithStory(f"session {manifest.session_id} ran in {manifest.mode.value} mode")
    end_ms = records[-1].timestamp_ms if records else 0
    changes = [
        (str(r.payload["state"]), int(r.payload["at_ms"]))
        for r in records
        if r.kind is RecordKind.TRANSITION and r.payload.get("kind") == "state_changed"
    ]
    return timeline_from_state_changes(changes, end_ms=end_ms)


DEFAULT_SURGE_HORIZON_MS = 10_000


def post_event_surge(
    records: list[LogRecord],
    overlay: Optional[dict[str, str]],
    event_state: str = "ghost_present",
    horizon_ms: int = DEFAULT_SURGE_HORIZON_MS,
) -> float:
    """Percent change in prosocial comment count around each entry into a state.

    For each entry at time e, counts prosocial comments in [e - horizon, e)
    versus (e, e + horizon], computes per-entry percentage change with a
    denominator floor of one comment, and averages over entries. Zero activity
    on both sides of an entry reads as 0%.
    """
    if overlay is None:
        raise MissingOverlay("post_event_surge requires a label overlay")
    comments = _comments(records)
    ids = {_message_id(r) for r in comments}
    unknown = set(overlay) - ids
    if unknown:
        raise OverlayIdMismatch(
            f"{len(unknown)} overlay ids not in log (e.g. {sorted(unknown)[:3]})"
        )

    entries = [
        int(r.payload["at_ms"])
        for r in records
        if r.kind is RecordKind.TRANSITION
        and r.payload.get("kind") == "state_changed"
        and r.payload.get("state") == event_state
    ]
    if not entries:
        raise NoSuchEvent(f"no entries into state {event_state!r}")

    prosocial_ids = _prosocial_ids(comments, overlay)
    prosocial_times = sorted(
        r.timestamp_ms for r in comments if _message_id(r) in prosocial_ids
    )

    changes: list[float] = []
    for entry in entries:
        before = sum(1 for t in prosocial_times if entry - horizon_ms <= t < entry)
        after = sum(1 for t in prosocial_times if entry < t <= entry + horizon_ms)
        changes.append((after - before) / max(before, 1) * 100.0)
    return sum(changes) / len(changes)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="storychat-stats",
        description="Compute comment counts, state timeline, and prosocial surge from a session log.",
    )
    parser.add_argument("session", type=Path, help="session .jsonl file")
    parser.add_argument("--labels", type=Path, help="label overlay .labels.jsonl file")
    parser.add_argument("--surge", metavar="STATE", help="compute prosocial surge around entries into STATE")
    parser.add_argument("--horizon-ms", type=int, default=DEFAULT_SURGE_HORIZON_MS)
    parser.add_argument("--out", type=Path, help="output JSON path (default: stdout)")
    args = parser.parse_args(argv)

    manifest, records = load(args.session)
    overlay = load_labels(args.labels) if args.labels else None

    output: dict[str, Any] = {
        "session_id": manifest.session_id,
        "mode": manifest.mode.value,
        "stats": session_stats(records, overlay),
    }
    if manifest.mode is Mode.WITH_STORY:
        output["timeline"] = transition_timeline(manifest, records)
    if args.surge:
        output["surge"] = {
            "event": args.surge,
            "horizon_ms": args.horizon_ms,
            "percent": post_event_surge(records, overlay, args.surge, args.horizon_ms),
        }

    rendered = json.dumps(output, indent=2, sort_keys=True)
    if args.out:
        args.out.write_text(rendered + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(rendered)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
