"""Ordered pipeline core: classify -> window -> narrative, on logical time.

Everything here runs on session-logical milliseconds, never the wall clock.
The live service advances logical time from a wall-backed session clock;
replay and the scenario runner advance it from recorded or generated
timestamps. Because verdicts, transitions, and log records depend only on
logical time, a session replayed at any speed reproduces them bit-for-bit.

Window evaluations fire at every multiple of window_ms; narrative ticks at a
fixed finer cadence so the ghost-expelled scene can time out between windows.
At one instant the order is: messages first, then the window boundary, then
the tick.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .classifier import ClassificationResult, Rule, classify
from .config import EngineConfig
from .detector import NegativityDetector, WindowVerdict
from .fsm import EventKind, FsmSignal, NarrativeEvent, NarrativeFsm, SignalKind
from .messages import ChatMessage
from .sessionlog import LogRecord, Mode, RecordKind

logger = logging.getLogger(__name__)

# Narrative tick cadence; finer windows tick at the window rate.
TICK_INTERVAL_MS = 1000

MAX_NOTICE_LENGTH = 500


class EngineError(Exception):
    """Base class for admin/command failures."""


class InvalidValue(EngineError):
    """Rejected admin parameter (negative threshold, unknown rule, ...)."""


class EmptyNotice(EngineError):
    """Notice text empty or over the length bound."""


class EmptyBody(EngineError):
    """Participant comment with no body."""


class Unauthenticated(EngineError):
    """Missing or wrong access token."""


@dataclass(frozen=True)
class ClientUpdate:
    """One fan-out item; seq is strictly increasing engine-wide."""

    type: str  # state | chat | notice | stats
    seq: int
    t: int
    body: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.type, "seq": self.seq, "t": self.t, **self.body}


LogSink = Callable[[LogRecord], None]
UpdateSink = Callable[[ClientUpdate], None]


class Pipeline:
    """Single-owner composition of classifier, detector, and narrative FSM.

    All mutation happens on one logical ordering domain: exactly one caller
    invokes process_message/advance_to/admin ops, in timestamp order. Sinks
    are called synchronously in that same order.
    """

    def __init__(
        self,
        config: EngineConfig,
        log_sink: LogSink,
        update_sink: UpdateSink,
    ) -> None:
        self.classifier_config = config.classifier
        self.detector = NegativityDetector(config.detector)
        self.fsm = NarrativeFsm(config.fsm)
        self.mode = config.mode
        self.viewers = config.nominal_viewers
        self._log_sink = log_sink
        self._update_sink = update_sink
        self.window_ms = config.detector.window_ms
        self.tick_ms = min(TICK_INTERVAL_MS, self.window_ms)
        self._next_boundary = self.window_ms
        self._next_tick = self.tick_ms
        self._now = 0
        self._log_seq = 0
        self._update_seq = 0
        self.last_verdict: Optional[WindowVerdict] = None
        self.messages_processed = 0

    @property
    def now_ms(self) -> int:
        return self._now

    # ------------------------------------------------------------------ sinks

    def _log(self, kind: RecordKind, timestamp_ms: int, payload: dict[str, Any]) -> LogRecord:
        self._log_seq += 1
        record = LogRecord(seq=self._log_seq, timestamp_ms=timestamp_ms, kind=kind, payload=payload)
        self._log_sink(record)
        return record

    def _broadcast(self, update_type: str, t: int, body: dict[str, Any]) -> None:
        self._update_seq += 1
        self._update_sink(ClientUpdate(type=update_type, seq=self._update_seq, t=t, body=body))

    # ------------------------------------------------------------- scheduling

    def advance_to(self, t_ms: int) -> None:
        """Fire every due window boundary and tick up to and including t_ms."""
        while True:
            due = min(self._next_boundary, self._next_tick)
            if due > t_ms:
                break
            if self._next_boundary <= self._next_tick:
                if self._next_boundary == self._next_tick:
                    self._fire_boundary(self._next_boundary)
                    self._fire_tick(self._next_tick)
                    self._next_tick += self.tick_ms
                else:
                    self._fire_boundary(self._next_boundary)
                self._next_boundary += self.window_ms
            else:
                self._fire_tick(self._next_tick)
                self._next_tick += self.tick_ms
        if t_ms > self._now:
            self._now = t_ms

    def _advance_before(self, t_ms: int) -> None:
        # Fire schedules strictly earlier than an incoming message so a
        # message at exactly a boundary lands inside that window.
        while True:
            due = min(self._next_boundary, self._next_tick)
            if due >= t_ms:
                break
            self.advance_to(due)

    def _fire_boundary(self, t_ms: int) -> None:
        verdict = self.detector.evaluate(t_ms, self.viewers)
        self.last_verdict = verdict
        self._now = max(self._now, t_ms)
        self._log(RecordKind.VERDICT, t_ms, verdict.to_dict())
        self._broadcast("stats", t_ms, self._stats_body())
        if self.mode is Mode.WITH_STORY:
            kind = SignalKind.WINDOW_EXCEEDED if verdict.exceeded else SignalKind.WINDOW_BELOW
            self._run_fsm(FsmSignal(kind=kind, at_ms=t_ms))

    def _fire_tick(self, t_ms: int) -> None:
        self._now = max(self._now, t_ms)
        if self.mode is Mode.WITH_STORY:
            self._run_fsm(FsmSignal(kind=SignalKind.TICK, at_ms=t_ms))

    def _run_fsm(self, signal: FsmSignal) -> None:
        self._handle_events(self.fsm.step(signal))

    def _handle_events(self, events: list[NarrativeEvent]) -> None:
        for event in events:
            self._log(RecordKind.TRANSITION, event.at_ms, event.to_dict())
            self._broadcast(
                "state",
                event.at_ms,
                {"plot": event.state.value, "event": event.kind.value},
            )

    # --------------------------------------------------------------- messages

    def process_message(self, message: ChatMessage) -> ClassificationResult:
        """Classify, record, log, and fan out one chat message in order."""
        if message.timestamp_ms < self._now:
            logger.warning(
                "message %s timestamp %d behind pipeline clock %d; clamping",
                message.id,
                message.timestamp_ms,
                self._now,
            )
            message = dataclasses.replace(message, timestamp_ms=self._now)
        self._advance_before(message.timestamp_ms)
        self._now = max(self._now, message.timestamp_ms)

        result = classify(message, self.classifier_config)
        self.detector.record(message, result)
        self._log(
            RecordKind.COMMENT,
            message.timestamp_ms,
            {"message": message.to_dict(), "classification": result.to_dict()},
        )
        self._broadcast(
            "chat",
            message.timestamp_ms,
            {
                "id": message.id,
                "author": message.author,
                "body": message.body,
                "negative": result.negative,
                "source": message.source.value,
            },
        )
        if self.mode is Mode.WITH_STORY and not result.negative:
            self._run_fsm(
                FsmSignal(kind=SignalKind.NON_NEGATIVE_COMMENT, at_ms=message.timestamp_ms)
            )
        self.messages_processed += 1
        return result

    # ------------------------------------------------------------------ admin

    def set_threshold(self, value: float) -> dict[str, Any]:
        if value < 0:
            raise InvalidValue(f"threshold must be >= 0, got {value}")
        self.detector.config = dataclasses.replace(self.detector.config, threshold_per_10k=value)
        self._admin({"action": "set_threshold", "threshold_per_10k": value})
        return {"ok": True, "threshold_per_10k": value}

    def set_filter(self, changes: dict[str, Any]) -> dict[str, Any]:
        """Update classifier thresholds/rule set for subsequent messages."""
        updates: dict[str, Any] = {}
        try:
            if "enabled_rules" in changes:
                updates["enabled_rules"] = frozenset(
                    Rule.from_token(str(r)) for r in changes["enabled_rules"]
                )
            for key in ("caps_ratio_max", "symbol_ratio_max"):
                if key in changes:
                    updates[key] = float(changes[key])
            for key in ("caps_min_length", "emote_count_max"):
                if key in changes:
                    updates[key] = int(changes[key])
            if "profanity_terms" in changes:
                updates["profanity_terms"] = frozenset(str(t) for t in changes["profanity_terms"])
            if "emote_lexicon" in changes:
                updates["emote_lexicon"] = frozenset(str(t) for t in changes["emote_lexicon"])
            unknown = set(changes) - {
                "enabled_rules",
                "caps_ratio_max",
                "symbol_ratio_max",
                "caps_min_length",
                "emote_count_max",
                "profanity_terms",
                "emote_lexicon",
            }
            if unknown:
                raise InvalidValue(f"unknown filter fields: {sorted(unknown)}")
            self.classifier_config = self.classifier_config.with_updates(**updates)
        except (ValueError, TypeError) as exc:
            raise InvalidValue(str(exc)) from exc
        self._admin({"action": "set_filter", **{k: v for k, v in changes.items()}})
        return {"ok": True, "classifier": self.classifier_config.to_dict()}

    def set_mode(self, mode: Mode) -> dict[str, Any]:
        if mode is self.mode:
            self._admin({"action": "set_mode", "mode": mode.value})
            return {"ok": True, "mode": mode.value}
        if mode is Mode.WITHOUT_STORY:
            # Clear the stage while still in story mode so the mask-off and
            # return-to-stable transitions are logged and broadcast.
            self._handle_events(self.fsm.reset(self._now))
        self.mode = mode
        self._admin({"action": "set_mode", "mode": mode.value})
        return {"ok": True, "mode": mode.value}

    def set_viewers(self, count: int) -> dict[str, Any]:
        if count < 0:
            raise InvalidValue(f"viewer count must be >= 0, got {count}")
        self.viewers = count
        self._admin({"action": "set_viewers", "viewers": count})
        return {"ok": True, "viewers": count}

    def notice(self, text: str) -> dict[str, Any]:
        if not text or not text.strip():
            raise EmptyNotice("notice text must be non-empty")
        if len(text) > MAX_NOTICE_LENGTH:
            raise EmptyNotice(f"notice text exceeds {MAX_NOTICE_LENGTH} characters")
        self._log(RecordKind.NOTICE, self._now, {"text": text})
        self._broadcast("notice", self._now, {"text": text})
        return {"ok": True}

    def _admin(self, payload: dict[str, Any]) -> None:
        self._log(RecordKind.ADMIN, self._now, payload)
        self._broadcast("stats", self._now, self._stats_body())

    # ------------------------------------------------------------------ state

    def _stats_body(self) -> dict[str, Any]:
        return {
            "window": self.last_verdict.to_dict() if self.last_verdict else None,
            "mode": self.mode.value,
            "viewers": self.viewers,
        }

    def state_snapshot(self) -> dict[str, Any]:
        """Consistent view taken between pipeline steps."""
        return {
            "plot": self.fsm.state.value if self.mode is Mode.WITH_STORY else None,
            "window": self.last_verdict.to_dict() if self.last_verdict else None,
            "mode": self.mode.value,
            "viewers": self.viewers,
            "now_ms": self._now,
            "configs": {
                "classifier": self.classifier_config.to_dict(),
                "detector": self.detector.config.to_dict(),
                "fsm": self.fsm.config.to_dict(),
            },
        }
