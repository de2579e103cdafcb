"""Engine configuration: one JSON file wiring every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

from .classifier import ClassifierConfig
from .detector import DetectorConfig
from .fsm import FsmConfig
from .sessionlog import Mode
from .sources import SourceConfig, SourceMode


@dataclass(frozen=True)
class EngineConfig:
    source: SourceConfig = field(
        default_factory=lambda: SourceConfig(mode=SourceMode.SYNTHETIC)
    )
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    fsm: FsmConfig = field(default_factory=FsmConfig)
    mode: Mode = Mode.WITH_STORY
    nominal_viewers: int = 10_000
    listen_address: str = "127.0.0.1:8710"
    # Staging-grade auth and persistence knobs; None disables the check.
    admin_token: Optional[str] = None
    participant_token: Optional[str] = None
    log_dir: str = "./sessions"

    def __post_init__(self) -> None:
        if self.nominal_viewers < 0:
            raise ValueError(f"nominal_viewers must be >= 0, got {self.nominal_viewers}")

    def with_updates(self, **changes: Any) -> "EngineConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "source": self.source.to_dict(),
            "classifier": self.classifier.to_dict(),
            "detector": self.detector.to_dict(),
            "fsm": self.fsm.to_dict(),
            "mode": self.mode.value,
            "nominal_viewers": self.nominal_viewers,
            "listen_address": self.listen_address,
            "log_dir": self.log_dir,
        }
        if self.admin_token is not None:
            data["admin_token"] = self.admin_token
        if self.participant_token is not None:
            data["participant_token"] = self.participant_token
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EngineConfig":
        kwargs: dict[str, Any] = {}
        if "source" in data:
            kwargs["source"] = SourceConfig.from_dict(data["source"])
        if "classifier" in data:
            kwargs["classifier"] = ClassifierConfig.from_dict(data["classifier"])
        if "detector" in data:
            kwargs["detector"] = DetectorConfig.from_dict(data["detector"])
        fsm_data = dict(data.get("fsm", {}))
        # The de-escalation width lives in both configs; the detector's value
        # seeds the FSM when the FSM section leaves it out.
        if "deescalate_windows" not in fsm_data and "detector" in data:
            detector_section = data["detector"]
            if "deescalate_windows" in detector_section:
                fsm_data["deescalate_windows"] = detector_section["deescalate_windows"]
        if fsm_data or "fsm" in data:
            kwargs["fsm"] = FsmConfig.from_dict(fsm_data)
        if "mode" in data:
            kwargs["mode"] = Mode.from_token(str(data["mode"]))
        if "nominal_viewers" in data:
            kwargs["nominal_viewers"] = int(data["nominal_viewers"])
        for key in ("listen_address", "log_dir"):
            if key in data:
                kwargs[key] = str(data[key])
        for key in ("admin_token", "participant_token"):
            if key in data and data[key] is not None:
                kwargs[key] = str(data[key])
        return cls(**kwargs)


def load_engine_config(path: Union[str, Path]) -> EngineConfig:
    return EngineConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
