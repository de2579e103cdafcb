"""IRC wire handling for Twitch-compatible chat servers.

Grammar handled per line:

    ['@' tags SP] [':' prefix SP] command [params] [' :' trailing]

Tags are kept as opaque key/value text; nothing downstream depends on them.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .messages import ChatMessage, Source

MAX_LINE_LENGTH = 4096


class IrcError(Exception):
    """Base class for wire-level parse failures."""


class MalformedFrame(IrcError):
    """Line had no command token."""


class OversizedLine(IrcError):
    """Line exceeded MAX_LINE_LENGTH characters."""


@dataclass(frozen=True)
class IrcFrame:
    raw: str
    command: str
    tags: dict[str, str] = field(default_factory=dict)
    prefix: Optional[str] = None
    params: list[str] = field(default_factory=list)
    trailing: Optional[str] = None

    @property
    def nick(self) -> str:
        """Nick portion of the prefix ('nick!user@host' -> 'nick')."""
        if not self.prefix:
            return ""
        return self.prefix.split("!", 1)[0]

    def same_shape(self, other: "IrcFrame") -> bool:
        """Equality ignoring the raw line (canonical frame identity)."""
        return (
            self.command == other.command
            and self.tags == other.tags
            and self.prefix == other.prefix
            and self.params == other.params
            and self.trailing == other.trailing
        )


def parse_irc_line(raw: str) -> IrcFrame:
    """Split one CR/LF-free line into tags, prefix, command, params, trailing.

    Raises MalformedFrame when no command token is present and OversizedLine
    past MAX_LINE_LENGTH characters.
    """
    if len(raw) > MAX_LINE_LENGTH:
        raise OversizedLine(f"line length {len(raw)} exceeds {MAX_LINE_LENGTH}")
    rest = raw.rstrip("\r\n")

    tags: dict[str, str] = {}
    if rest.startswith("@"):
        tag_part, _, rest = rest[1:].partition(" ")
        for item in tag_part.split(";"):
            if not item:
                continue
            key, _, value = item.partition("=")
            tags[key] = value

    prefix: Optional[str] = None
    if rest.startswith(":"):
        prefix_part, _, rest = rest[1:].partition(" ")
        prefix = prefix_part

    trailing: Optional[str] = None
    if rest.startswith(":"):
        # Degenerate: trailing immediately after prefix, no command.
        rest, trailing = "", rest[1:]
    elif " :" in rest:
        rest, _, trailing = rest.partition(" :")

    tokens = rest.split()
    if not tokens:
        raise MalformedFrame(f"no command token in line: {raw!r}")

    return IrcFrame(
        raw=raw,
        command=tokens[0],
        tags=tags,
        prefix=prefix,
        params=tokens[1:],
        trailing=trailing,
    )


def serialize_frame(frame: IrcFrame) -> str:
    """Render a frame back to one wire line, canonically equivalent to its source."""
    parts: list[str] = []
    if frame.tags:
        rendered = ";".join(k if v == "" else f"{k}={v}" for k, v in frame.tags.items())
        parts.append(f"@{rendered}")
    if frame.prefix:
        parts.append(f":{frame.prefix}")
    parts.append(frame.command)
    parts.extend(frame.params)
    line = " ".join(parts)
    if frame.trailing is not None:
        line += f" :{frame.trailing}"
    return line


class Clock(Protocol):
    def now_ms(self) -> int: ...


def frame_to_message(frame: IrcFrame, source: Source, clock: Clock) -> Optional[ChatMessage]:
    """Build a ChatMessage from a PRIVMSG frame; every other command yields None.

    Empty or whitespace-only bodies are dropped so downstream stages never see
    an empty message.
    """
    if frame.command != "PRIVMSG":
        return None
    body = (frame.trailing or "").strip()
    if not body:
        return None
    return ChatMessage(
        id=uuid.uuid4().hex[:12],
        channel=frame.params[0] if frame.params else "",
        author=frame.nick,
        body=body,
        timestamp_ms=clock.now_ms(),
        source=source,
    )


def keepalive_response(frame: IrcFrame) -> Optional[str]:
    """PONG line answering a PING frame; None for anything else."""
    if frame.command != "PING":
        return None
    return f"PONG :{frame.trailing or ''}"
