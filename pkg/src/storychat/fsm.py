"""Narrative plot state machine driven by window verdicts and chat activity.

The storyline escalates through darkening into a ghost encounter as windows
keep exceeding the negativity threshold, lets non-negative chat fight back
with heart bursts, and de-escalates back to the stable scene once enough
consecutive windows stay below threshold. Ghost expulsion is a short transient
scene that returns to stable on a timer tick.

Transition table (anything not listed: no change, no events):

    stable        + exceeded                      -> darkening
    darkening     + exceeded (armed)              -> ghost_present  [mask on]
    darkening     + below x deescalate_windows    -> stable
    ghost_present + non-negative comment          -> hearts_battle  [heart burst]
    hearts_battle + non-negative comment          -> hearts_battle  [heart burst]
    ghost_present/hearts_battle
                  + below x deescalate_windows    -> ghost_expelled [mask off]
    ghost_expelled+ tick >= entry + expel duration-> stable         [return to base]

"Armed" means the cumulative count of exceeded windows in darkening (counting
the window that entered it) has reached escalate_windows; an exceeded window
in any state resets the consecutive-below counter.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional


class PlotState(Enum):
    STABLE = "stable"
    DARKENING = "darkening"
    GHOST_PRESENT = "ghost_present"
    HEARTS_BATTLE = "hearts_battle"
    GHOST_EXPELLED = "ghost_expelled"

    @classmethod
    def from_token(cls, token: str) -> "PlotState":
        return cls(token)


MASKED_STATES = frozenset({PlotState.GHOST_PRESENT, PlotState.HEARTS_BATTLE})


class SignalKind(Enum):
    WINDOW_EXCEEDED = "window_exceeded"
    WINDOW_BELOW = "window_below"
    NON_NEGATIVE_COMMENT = "non_negative_comment"
    TICK = "tick"


@dataclass(frozen=True)
class FsmSignal:
    kind: SignalKind
    at_ms: int


class EventKind(Enum):
    STATE_CHANGED = "state_changed"
    HEART_BURST = "heart_burst"
    RED_MASK_ON = "red_mask_on"
    RED_MASK_OFF = "red_mask_off"
    RETURN_TO_BASE = "return_to_base"


@dataclass(frozen=True)
class NarrativeEvent:
    kind: EventKind
    state: PlotState
    seq: int
    at_ms: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "state": self.state.value,
            "seq": self.seq,
            "at_ms": self.at_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NarrativeEvent":
        return cls(
            kind=EventKind(data["kind"]),
            state=PlotState(data["state"]),
            seq=int(data["seq"]),
            at_ms=int(data["at_ms"]),
        )


@dataclass(frozen=True)
class FsmConfig:
    escalate_windows: int = 1
    deescalate_windows: int = 2
    expel_duration_ms: int = 3000

    def __post_init__(self) -> None:
        if self.escalate_windows < 1:
            raise ValueError(f"escalate_windows must be >= 1, got {self.escalate_windows}")
        if self.deescalate_windows < 1:
            raise ValueError(f"deescalate_windows must be >= 1, got {self.deescalate_windows}")
        if self.expel_duration_ms <= 0:
            raise ValueError(f"expel_duration_ms must be > 0, got {self.expel_duration_ms}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "escalate_windows": self.escalate_windows,
            "deescalate_windows": self.deescalate_windows,
            "expel_duration_ms": self.expel_duration_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FsmConfig":
        kwargs: dict[str, Any] = {}
        for key in ("escalate_windows", "deescalate_windows", "expel_duration_ms"):
            if key in data:
                kwargs[key] = int(data[key])
        return cls(**kwargs)


class NarrativeFsm:
    """Deterministic plot driver. Single logical owner feeds signals in order."""

    def __init__(self, config: FsmConfig | None = None) -> None:
        self.config = config or FsmConfig()
        self.state = PlotState.STABLE
        self._seq = 0
        self._below_streak = 0
        self._exceeded_in_darkening = 0
        self._expelled_entered_at: Optional[int] = None

    def _emit(self, kind: EventKind, at_ms: int) -> NarrativeEvent:
        self._seq += 1
        return NarrativeEvent(kind=kind, state=self.state, seq=self._seq, at_ms=at_ms)

    def step(self, signal: FsmSignal) -> list[NarrativeEvent]:
        """Apply one signal; returns emitted events (possibly none)."""
        events: list[NarrativeEvent] = []
        at = signal.at_ms

        if signal.kind is SignalKind.WINDOW_EXCEEDED:
            self._below_streak = 0
            if self.state is PlotState.STABLE:
                self.state = PlotState.DARKENING
                self._exceeded_in_darkening = 1
                events.append(self._emit(EventKind.STATE_CHANGED, at))
            elif self.state is PlotState.DARKENING:
                if self._exceeded_in_darkening >= self.config.escalate_windows:
                    self.state = PlotState.GHOST_PRESENT
                    self._exceeded_in_darkening = 0
                    events.append(self._emit(EventKind.STATE_CHANGED, at))
                    events.append(self._emit(EventKind.RED_MASK_ON, at))
                else:
                    self._exceeded_in_darkening += 1

        elif signal.kind is SignalKind.WINDOW_BELOW:
            self._below_streak += 1
            if self._below_streak >= self.config.deescalate_windows:
                if self.state is PlotState.DARKENING:
                    self.state = PlotState.STABLE
                    self._below_streak = 0
                    self._exceeded_in_darkening = 0
                    events.append(self._emit(EventKind.STATE_CHANGED, at))
                elif self.state in MASKED_STATES:
                    self.state = PlotState.GHOST_EXPELLED
                    self._below_streak = 0
                    self._expelled_entered_at = at
                    events.append(self._emit(EventKind.STATE_CHANGED, at))
                    events.append(self._emit(EventKind.RED_MASK_OFF, at))

        elif signal.kind is SignalKind.NON_NEGATIVE_COMMENT:
            if self.state is PlotState.GHOST_PRESENT:
                self.state = PlotState.HEARTS_BATTLE
                events.append(self._emit(EventKind.STATE_CHANGED, at))
                events.append(self._emit(EventKind.HEART_BURST, at))
            elif self.state is PlotState.HEARTS_BATTLE:
                events.append(self._emit(EventKind.HEART_BURST, at))

        elif signal.kind is SignalKind.TICK:
            if (
                self.state is PlotState.GHOST_EXPELLED
                and self._expelled_entered_at is not None
                and at >= self._expelled_entered_at + self.config.expel_duration_ms
            ):
                self.state = PlotState.STABLE
                self._expelled_entered_at = None
                events.append(self._emit(EventKind.STATE_CHANGED, at))
                events.append(self._emit(EventKind.RETURN_TO_BASE, at))

        return events

    def reset(self, at_ms: int = 0) -> list[NarrativeEvent]:
        """Return to stable with counters zeroed; seq keeps increasing.

        The red mask must not persist across a reset, so leaving a masked
        state emits RedMaskOff.
        """
        events: list[NarrativeEvent] = []
        was_masked = self.state in MASKED_STATES
        changed = self.state is not PlotState.STABLE
        self.state = PlotState.STABLE
        self._below_streak = 0
        self._exceeded_in_darkening = 0
        self._expelled_entered_at = None
        if changed:
            events.append(self._emit(EventKind.STATE_CHANGED, at_ms))
        if was_masked:
            events.append(self._emit(EventKind.RED_MASK_OFF, at_ms))
        return events
