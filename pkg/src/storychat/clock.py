"""Session clocks: every timestamp in the engine is milliseconds since session start.

Live sources stamp messages with a wall-backed clock; replay and simulation
drive a manual clock so the same pipeline runs on logical time.
"""

from __future__ import annotations

import time


class SessionClock:
    """Monotonic wall-backed clock, origin fixed at construction."""

    def __init__(self) -> None:
        self._origin = time.monotonic()

    def now_ms(self) -> int:
        return int((time.monotonic() - self._origin) * 1000)


class ManualClock:
    """Logical clock advanced explicitly; never moves on its own."""

    def __init__(self, start_ms: int = 0) -> None:
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def advance_to(self, t_ms: int) -> None:
        if t_ms > self._now_ms:
            self._now_ms = t_ms
