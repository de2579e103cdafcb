"""Rule-based negativity filter for chat messages.

A message is negative when any enabled rule fires: profanity terms, excessive
capital letters, emote spam, or symbol spam. Rules are plain threshold checks;
there is deliberately no ML here, and no attempt to detect positive sentiment.
Classification is pure and deterministic given (message, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Iterable

from .messages import ChatMessage


class Rule(Enum):
    PROFANITY = "profanity"
    CAPS = "caps"
    EMOTE_SPAM = "emote_spam"
    SYMBOL_SPAM = "symbol_spam"

    @classmethod
    def from_token(cls, token: str) -> "Rule":
        normalized = token.strip().lower().replace("-", "_")
        aliases = {
            "profanity": cls.PROFANITY,
            "caps": cls.CAPS,
            "emotespam": cls.EMOTE_SPAM,
            "emote_spam": cls.EMOTE_SPAM,
            "symbolspam": cls.SYMBOL_SPAM,
            "symbol_spam": cls.SYMBOL_SPAM,
        }
        if normalized not in aliases:
            raise ValueError(f"unknown rule name: {token!r}")
        return aliases[normalized]


ALL_RULES = frozenset(Rule)


class Label(Enum):
    NEGATIVE = "negative"
    NOT_NEGATIVE = "not_negative"


def _load_lexicon(name: str) -> frozenset[str]:
    text = resources.files("storychat.data").joinpath(name).read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def default_profanity_terms() -> frozenset[str]:
    """Starter profanity list; deployments are expected to supply their own."""
    return _load_lexicon("profanity.txt")


def default_emote_lexicon() -> frozenset[str]:
    return _load_lexicon("emotes.txt")


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds and lexicons for the four negativity rules.

    Defaults are calibration knobs in the spirit of common chat-moderation
    bot defaults, overridable from the engine config file.
    """

    profanity_terms: frozenset[str] = field(default_factory=default_profanity_terms)
    caps_ratio_max: float = 0.8
    caps_min_length: int = 6
    emote_count_max: int = 5
    emote_lexicon: frozenset[str] = field(default_factory=default_emote_lexicon)
    symbol_ratio_max: float = 0.5
    enabled_rules: frozenset[Rule] = ALL_RULES

    def __post_init__(self) -> None:
        if not 0.0 <= self.caps_ratio_max <= 1.0:
            raise ValueError(f"caps_ratio_max must be in [0,1], got {self.caps_ratio_max}")
        if not 0.0 <= self.symbol_ratio_max <= 1.0:
            raise ValueError(f"symbol_ratio_max must be in [0,1], got {self.symbol_ratio_max}")
        if self.caps_min_length < 1:
            raise ValueError(f"caps_min_length must be >= 1, got {self.caps_min_length}")
        if self.emote_count_max < 0:
            raise ValueError(f"emote_count_max must be >= 0, got {self.emote_count_max}")
        bad = {r for r in self.enabled_rules if not isinstance(r, Rule)}
        if bad:
            raise ValueError(f"enabled_rules contains non-rules: {bad}")
        # Normalize stored terms so matching is set membership on lowercase tokens.
        object.__setattr__(self, "profanity_terms", frozenset(t.lower() for t in self.profanity_terms))

    def with_updates(self, **changes: Any) -> "ClassifierConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "profanity_terms": sorted(self.profanity_terms),
            "caps_ratio_max": self.caps_ratio_max,
            "caps_min_length": self.caps_min_length,
            "emote_count_max": self.emote_count_max,
            "emote_lexicon": sorted(self.emote_lexicon),
            "symbol_ratio_max": self.symbol_ratio_max,
            "enabled_rules": sorted(r.value for r in self.enabled_rules),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ClassifierConfig":
        kwargs: dict[str, Any] = {}
        if "profanity_terms" in data:
            kwargs["profanity_terms"] = frozenset(str(t) for t in data["profanity_terms"])
        if "emote_lexicon" in data:
            kwargs["emote_lexicon"] = frozenset(str(t) for t in data["emote_lexicon"])
        if "enabled_rules" in data:
            kwargs["enabled_rules"] = frozenset(Rule.from_token(str(r)) for r in data["enabled_rules"])
        for key in ("caps_ratio_max", "symbol_ratio_max"):
            if key in data:
                kwargs[key] = float(data[key])
        for key in ("caps_min_length", "emote_count_max"):
            if key in data:
                kwargs[key] = int(data[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class ClassificationResult:
    """Verdict plus the exact rules that fired and the measured ratios."""

    label: Label
    fired: frozenset[Rule]
    caps_ratio: float
    symbol_ratio: float
    emote_count: int
    profanity_hits: tuple[str, ...]

    @property
    def negative(self) -> bool:
        return self.label is Label.NEGATIVE

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.value,
            "fired": sorted(r.value for r in self.fired),
            "metrics": {
                "caps_ratio": self.caps_ratio,
                "symbol_ratio": self.symbol_ratio,
                "emote_count": self.emote_count,
                "profanity_hits": list(self.profanity_hits),
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ClassificationResult":
        metrics = data.get("metrics", {})
        return cls(
            label=Label(data["label"]),
            fired=frozenset(Rule.from_token(r) for r in data.get("fired", [])),
            caps_ratio=float(metrics.get("caps_ratio", 0.0)),
            symbol_ratio=float(metrics.get("symbol_ratio", 0.0)),
            emote_count=int(metrics.get("emote_count", 0)),
            profanity_hits=tuple(metrics.get("profanity_hits", [])),
        )


def caps_ratio(body: str) -> float:
    """Uppercase letters over total letters; 0 when the body has no letters."""
    letters = [c for c in body if c.isalpha()]
    if not letters:
        return 0.0
    return sum(1 for c in letters if c.isupper()) / len(letters)


def symbol_ratio(body: str) -> float:
    """Non-alphanumeric share of the non-whitespace characters; 0 when none."""
    visible = [c for c in body if not c.isspace()]
    if not visible:
        return 0.0
    return sum(1 for c in visible if not c.isalnum()) / len(visible)


def count_emotes(body: str, lexicon: Iterable[str]) -> int:
    """Whitespace-delimited tokens of body that are exact lexicon members."""
    lexicon_set = lexicon if isinstance(lexicon, (set, frozenset)) else set(lexicon)
    return sum(1 for token in body.split() if token in lexicon_set)


def _strip_token_edges(token: str) -> str:
    # Punctuation stripped at token edges for profanity matching only.
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def _profanity_hits(body: str, terms: frozenset[str]) -> tuple[str, ...]:
    hits: list[str] = []
    for token in body.lower().split():
        stripped = _strip_token_edges(token)
        if stripped in terms:
            hits.append(stripped)
    return tuple(hits)


def classify(message: ChatMessage, config: ClassifierConfig) -> ClassificationResult:
    """Run every enabled rule against the message body.

    Negative if and only if at least one rule fires:
      profanity   - any configured term present as a case-insensitive token
      caps        - >= caps_min_length letters and caps_ratio > caps_ratio_max
      emote_spam  - emote token count > emote_count_max
      symbol_spam - body length >= 4 and symbol_ratio > symbol_ratio_max
    """
    body = message.body
    ratio_caps = caps_ratio(body)
    ratio_symbols = symbol_ratio(body)
    emotes = count_emotes(body, config.emote_lexicon)
    hits = _profanity_hits(body, config.profanity_terms)
    letter_count = sum(1 for c in body if c.isalpha())

    fired: set[Rule] = set()
    if Rule.PROFANITY in config.enabled_rules and hits:
        fired.add(Rule.PROFANITY)
    if (
        Rule.CAPS in config.enabled_rules
        and letter_count >= config.caps_min_length
        and ratio_caps > config.caps_ratio_max
    ):
        fired.add(Rule.CAPS)
    if Rule.EMOTE_SPAM in config.enabled_rules and emotes > config.emote_count_max:
        fired.add(Rule.EMOTE_SPAM)
    if (
        Rule.SYMBOL_SPAM in config.enabled_rules
        and len(body) >= 4
        and ratio_symbols > config.symbol_ratio_max
    ):
        fired.add(Rule.SYMBOL_SPAM)

    return ClassificationResult(
        label=Label.NEGATIVE if fired else Label.NOT_NEGATIVE,
        fired=frozenset(fired),
        caps_ratio=ratio_caps,
        symbol_ratio=ratio_symbols,
        emote_count=emotes,
        profanity_hits=hits,
    )
