"""Deterministic synthetic chat and the offline scenario runner.

The generator produces seeded Poisson-style traffic: neutral chatter at a
base rate over the whole run, plus negative bodies at burst rates inside
declared burst intervals. Everything is derived from one seeded RNG in a
fixed consumption order, so a seed always yields the same trace and a
scenario report is byte-identical across runs.

run_scenario drives the real pipeline on logical time with no sleeping; a
15-logical-minute scenario finishes in well under five seconds.
"""

from __future__ import annotations

import argparse
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Awaitable, Callable, Optional, Union

from .config import EngineConfig, load_engine_config
from .messages import ChatMessage, Source
from .pipeline import ClientUpdate, Pipeline
from .sessionlog import LogRecord, RecordKind, paced_emit

DEFAULT_BASE_RATE_PER_S = 1.67
DEFAULT_DURATION_MS = 900_000  # 15 logical minutes

DEFAULT_NEUTRAL_BODIES = (
    "hello everyone",
    "nice play",
    "lets go",
    "that was close",
    "good stream today",
    "hi chat",
    "what game is this",
    "love this part",
    "gg",
    "so cool",
)

DEFAULT_NEGATIVE_BODIES = (
    "wtf was that",
    "this is garbage",
    "you suck at this",
    "stfu already",
    "total trash stream",
)


class EmptyVocabulary(ValueError):
    """Generator asked to draw a body from an empty list."""


@dataclass(frozen=True)
class BurstSpec:
    start_ms: int
    duration_ms: int
    negative_rate_per_s: float

    def __post_init__(self) -> None:
        if self.start_ms < 0 or self.duration_ms <= 0:
            raise ValueError(f"burst window invalid: start={self.start_ms} duration={self.duration_ms}")
        if self.negative_rate_per_s < 0:
            raise ValueError(f"negative_rate_per_s must be >= 0, got {self.negative_rate_per_s}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "start_ms": self.start_ms,
            "duration_ms": self.duration_ms,
            "negative_rate_per_s": self.negative_rate_per_s,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BurstSpec":
        return cls(
            start_ms=int(data["start_ms"]),
            duration_ms=int(data["duration_ms"]),
            negative_rate_per_s=float(data["negative_rate_per_s"]),
        )


@dataclass(frozen=True)
class TrafficProfile:
    base_rate_per_s: float = DEFAULT_BASE_RATE_PER_S
    burst_specs: tuple[BurstSpec, ...] = ()
    seed: int = 0
    neutral_bodies: tuple[str, ...] = DEFAULT_NEUTRAL_BODIES
    negative_bodies: tuple[str, ...] = DEFAULT_NEGATIVE_BODIES

    def __post_init__(self) -> None:
        if self.base_rate_per_s < 0:
            raise ValueError(f"base_rate_per_s must be >= 0, got {self.base_rate_per_s}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "base_rate_per_s": self.base_rate_per_s,
            "burst_specs": [b.to_dict() for b in self.burst_specs],
            "seed": self.seed,
            "vocabulary": {
                "neutral_bodies": list(self.neutral_bodies),
                "negative_bodies": list(self.negative_bodies),
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrafficProfile":
        vocabulary = data.get("vocabulary", {})
        kwargs: dict[str, Any] = {}
        if "base_rate_per_s" in data:
            kwargs["base_rate_per_s"] = float(data["base_rate_per_s"])
        if "burst_specs" in data:
            kwargs["burst_specs"] = tuple(BurstSpec.from_dict(b) for b in data["burst_specs"])
        if "seed" in data:
            kwargs["seed"] = int(data["seed"])
        if "neutral_bodies" in vocabulary:
            kwargs["neutral_bodies"] = tuple(str(b) for b in vocabulary["neutral_bodies"])
        if "negative_bodies" in vocabulary:
            kwargs["negative_bodies"] = tuple(str(b) for b in vocabulary["negative_bodies"])
        return cls(**kwargs)


def _arrival_times(rng: random.Random, rate_per_s: float, start_ms: int, end_ms: int) -> list[int]:
    if rate_per_s <= 0:
        return []
    times: list[int] = []
    t = float(start_ms)
    while True:
        t += rng.expovariate(rate_per_s) * 1000.0
        if t >= end_ms:
            return times
        times.append(int(t))


def generate(profile: TrafficProfile, duration_ms: int) -> list[ChatMessage]:
    """Seeded traffic trace over [0, duration_ms); identical per seed."""
    if duration_ms <= 0:
        raise ValueError(f"duration_ms must be > 0, got {duration_ms}")
    for burst in profile.burst_specs:
        if burst.start_ms + burst.duration_ms > duration_ms:
            raise ValueError(
                f"burst [{burst.start_ms}, {burst.start_ms + burst.duration_ms}) "
                f"exceeds session duration {duration_ms}"
            )
    if profile.base_rate_per_s > 0 and not profile.neutral_bodies:
        raise EmptyVocabulary("neutral_bodies is empty")
    if profile.burst_specs and not profile.negative_bodies:
        raise EmptyVocabulary("negative_bodies is empty")

    rng = random.Random(profile.seed)
    drafts: list[tuple[int, int, str, str]] = []  # (t, insertion order, author, body)

    for t in _arrival_times(rng, profile.base_rate_per_s, 0, duration_ms):
        author = f"user{rng.randrange(1, 40)}"
        body = rng.choice(profile.neutral_bodies)
        drafts.append((t, len(drafts), author, body))

    for burst in profile.burst_specs:
        for t in _arrival_times(
            rng, burst.negative_rate_per_s, burst.start_ms, burst.start_ms + burst.duration_ms
        ):
            author = f"troll{rng.randrange(1, 10)}"
            body = rng.choice(profile.negative_bodies)
            drafts.append((t, len(drafts), author, body))

    drafts.sort(key=lambda d: (d[0], d[1]))
    return [
        ChatMessage(
            id=f"sim-{n:06d}",
            channel="#synthetic",
            author=author,
            body=body,
            timestamp_ms=t,
            source=Source.SYNTHETIC,
        )
        for n, (t, _, author, body) in enumerate(drafts, start=1)
    ]


def run_scenario(
    profile: TrafficProfile,
    engine_config: EngineConfig,
    duration_ms: int = DEFAULT_DURATION_MS,
) -> dict[str, Any]:
    """Run the full pipeline offline on logical time; no sleeping anywhere.

    The report carries the verdict timeline, the transition timeline (state
    intervals covering [0, duration]), and message counts. Identical
    (profile, config, duration) inputs produce identical report bytes.
    """
    from .analytics import timeline_from_state_changes

    records: list[LogRecord] = []
    updates: list[ClientUpdate] = []
    pipeline = Pipeline(engine_config, log_sink=records.append, update_sink=updates.append)

    messages = generate(profile, duration_ms)
    for message in messages:
        pipeline.process_message(message)
    pipeline.advance_to(duration_ms)

    verdicts = [r.payload for r in records if r.kind is RecordKind.VERDICT]
    transitions = [r.payload for r in records if r.kind is RecordKind.TRANSITION]
    state_changes = [
        (t["state"], t["at_ms"]) for t in transitions if t["kind"] == "state_changed"
    ]
    negatives = sum(
        1
        for r in records
        if r.kind is RecordKind.COMMENT and r.payload["classification"]["label"] == "negative"
    )
    return {
        "duration_ms": duration_ms,
        "counts": {
            "total": len(messages),
            "negative": negatives,
            "not_negative": len(messages) - negatives,
        },
        "verdicts": verdicts,
        "transitions": transitions,
        "timeline": timeline_from_state_changes(state_changes, end_ms=duration_ms),
    }


def report_bytes(report: dict[str, Any]) -> bytes:
    """Canonical serialization used for byte-identity checks."""
    return json.dumps(report, sort_keys=True, separators=(",", ":")).encode("utf-8")


class SyntheticSource:
    """Live-paced synthetic feed for the engine service (staging stand-in)."""

    def __init__(self, profile: TrafficProfile, duration_ms: int = DEFAULT_DURATION_MS) -> None:
        self.profile = profile
        self.duration_ms = duration_ms

    @classmethod
    def from_endpoint(cls, endpoint: str) -> "SyntheticSource":
        """endpoint is a profile JSON path; empty means the default profile."""
        if not endpoint:
            return cls(TrafficProfile())
        data = json.loads(Path(endpoint).read_text(encoding="utf-8"))
        duration = int(data.get("duration_ms", DEFAULT_DURATION_MS))
        return cls(TrafficProfile.from_dict(data), duration_ms=duration)

    async def run(
        self,
        sink: Callable[[ChatMessage], Union[None, Awaitable[None]]],
        watermark: Optional[Callable[[int], Union[None, Awaitable[None]]]] = None,
        speed: float = 1.0,
    ) -> None:
        messages = generate(self.profile, self.duration_ms)
        await paced_emit(
            messages, speed, sink, watermark=watermark, end_ms=self.duration_ms
        )


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="storychat-sim",
        description="Run a synthetic chat scenario through the engine pipeline offline.",
    )
    parser.add_argument("--profile", type=Path, required=True, help="traffic profile JSON")
    parser.add_argument("--engine-config", type=Path, help="engine config JSON (default: built-ins)")
    parser.add_argument("--duration-ms", type=int, default=DEFAULT_DURATION_MS)
    parser.add_argument("--out", type=Path, required=True, help="report JSON output path")
    args = parser.parse_args(argv)

    profile_data = json.loads(args.profile.read_text(encoding="utf-8"))
    profile = TrafficProfile.from_dict(profile_data)
    duration = int(profile_data.get("duration_ms", args.duration_ms))
    config = load_engine_config(args.engine_config) if args.engine_config else EngineConfig()

    report = run_scenario(profile, config, duration_ms=duration)
    args.out.write_bytes(report_bytes(report))
    print(f"wrote {args.out} ({report['counts']['total']} messages, "
          f"{len(report['timeline'])} timeline intervals)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
