"""Sliding-window negativity rate detection.

Keeps the last window_ms of classified messages and, at every window boundary,
compares the negative count against a viewer-normalized threshold: the rate
constant is expressed per ten thousand viewers per window, floored so that a
near-empty channel cannot trigger on a single stray negative.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Any

from .classifier import ClassificationResult
from .messages import ChatMessage

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_MS = 10_000
DEFAULT_THRESHOLD_PER_10K = 1.12
DEFAULT_MIN_EFFECTIVE_THRESHOLD = 1.0
DEFAULT_DEESCALATE_WINDOWS = 2


@dataclass(frozen=True)
class DetectorConfig:
    window_ms: int = DEFAULT_WINDOW_MS
    threshold_per_10k: float = DEFAULT_THRESHOLD_PER_10K
    min_effective_threshold: float = DEFAULT_MIN_EFFECTIVE_THRESHOLD
    deescalate_windows: int = DEFAULT_DEESCALATE_WINDOWS

    def __post_init__(self) -> None:
        if self.window_ms <= 0:
            raise ValueError(f"window_ms must be > 0, got {self.window_ms}")
        if self.threshold_per_10k < 0:
            raise ValueError(f"threshold_per_10k must be >= 0, got {self.threshold_per_10k}")
        if self.min_effective_threshold <= 0:
            raise ValueError(
                f"min_effective_threshold must be > 0, got {self.min_effective_threshold}"
            )
        if self.deescalate_windows < 1:
            raise ValueError(f"deescalate_windows must be >= 1, got {self.deescalate_windows}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "window_ms": self.window_ms,
            "threshold_per_10k": self.threshold_per_10k,
            "min_effective_threshold": self.min_effective_threshold,
            "deescalate_windows": self.deescalate_windows,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectorConfig":
        kwargs: dict[str, Any] = {}
        if "window_ms" in data:
            kwargs["window_ms"] = int(data["window_ms"])
        if "threshold_per_10k" in data:
            kwargs["threshold_per_10k"] = float(data["threshold_per_10k"])
        if "min_effective_threshold" in data:
            kwargs["min_effective_threshold"] = float(data["min_effective_threshold"])
        if "deescalate_windows" in data:
            kwargs["deescalate_windows"] = int(data["deescalate_windows"])
        return cls(**kwargs)


@dataclass(frozen=True)
class WindowVerdict:
    window_end_ms: int
    negative_count: int
    viewer_count: int
    effective_threshold: float
    exceeded: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "window_end_ms": self.window_end_ms,
            "negative_count": self.negative_count,
            "viewer_count": self.viewer_count,
            "effective_threshold": self.effective_threshold,
            "exceeded": self.exceeded,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "WindowVerdict":
        return cls(
            window_end_ms=int(data["window_end_ms"]),
            negative_count=int(data["negative_count"]),
            viewer_count=int(data["viewer_count"]),
            effective_threshold=float(data["effective_threshold"]),
            exceeded=bool(data["exceeded"]),
        )


def effective_threshold(viewers: int, config: DetectorConfig) -> float:
    """Viewer-scaled threshold with a floor for small channels."""
    scaled = config.threshold_per_10k * viewers / 10_000.0
    return max(config.min_effective_threshold, scaled)


class NegativityDetector:
    """Single-writer window state; record() and evaluate() run on the engine loop."""

    def __init__(self, config: DetectorConfig) -> None:
        self.config = config
        # (timestamp_ms, negative) pairs, oldest first.
        self._window: deque[tuple[int, bool]] = deque()
        self._last_ts: int = 0

    def record(self, message: ChatMessage, result: ClassificationResult) -> None:
        """Append one classified message and evict entries older than the window.

        A regressed timestamp is clamped to the last seen value and logged;
        ingestion order is authoritative.
        """
        ts = message.timestamp_ms
        if ts < self._last_ts:
            logger.warning(
                "timestamp regression: message %s at %d behind %d; clamping",
                message.id,
                ts,
                self._last_ts,
            )
            ts = self._last_ts
        self._last_ts = ts
        self._window.append((ts, result.negative))
        # Entries at or beyond window_ms age can never be counted again:
        # evaluate() intervals are (now - window_ms, now] with now >= newest.
        cutoff = ts - self.config.window_ms
        while self._window and self._window[0][0] <= cutoff:
            self._window.popleft()

    def evaluate(self, now_ms: int, viewers: int) -> WindowVerdict:
        """Verdict over (now_ms - window_ms, now_ms]; exceeded uses strict >."""
        low = now_ms - self.config.window_ms
        negatives = sum(1 for ts, neg in self._window if neg and low < ts <= now_ms)
        threshold = effective_threshold(viewers, self.config)
        return WindowVerdict(
            window_end_ms=now_ms,
            negative_count=negatives,
            viewer_count=viewers,
            effective_threshold=threshold,
            exceeded=negatives > threshold,
        )

    @property
    def last_timestamp_ms(self) -> int:
        return self._last_ts

    def window_size(self) -> int:
        return len(self._window)
