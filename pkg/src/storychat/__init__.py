"""StoryChat engine: chat negativity detection driving a narrative overlay.

Ingests live or replayed chat, classifies each comment with rule-based
negativity filters, watches windowed negativity rates against a
viewer-normalized threshold, and advances a six-plot narrative state machine
whose cues fan out to connected clients. Every session is an append-only
JSON-lines log that replays deterministically at any speed.
"""

__version__ = "0.1.0"

from .classifier import ClassificationResult, ClassifierConfig, Label, Rule, classify
from .config import EngineConfig, load_engine_config
from .detector import DetectorConfig, NegativityDetector, WindowVerdict, effective_threshold
from .fsm import FsmConfig, FsmSignal, NarrativeEvent, NarrativeFsm, PlotState, SignalKind
from .messages import ChatMessage, Source
from .sessionlog import (
    LogRecord,
    Mode,
    RecordKind,
    SessionLogWriter,
    SessionManifest,
    load,
    load_labels,
    replay,
)
from .sim import TrafficProfile, generate, run_scenario

__all__ = [
    "ChatMessage",
    "ClassificationResult",
    "ClassifierConfig",
    "DetectorConfig",
    "EngineConfig",
    "FsmConfig",
    "FsmSignal",
    "Label",
    "LogRecord",
    "Mode",
    "NarrativeEvent",
    "NarrativeFsm",
    "NegativityDetector",
    "PlotState",
    "RecordKind",
    "Rule",
    "SessionLogWriter",
    "SessionManifest",
    "SignalKind",
    "Source",
    "TrafficProfile",
    "WindowVerdict",
    "classify",
    "effective_threshold",
    "generate",
    "load",
    "load_labels",
    "load_engine_config",
    "replay",
    "run_scenario",
]
