"""Chat sources and the ordered merge point.

Live IRC and the local participant room push normalized messages into the
engine; replay and synthetic sources feed the same path on logical time.
merge_sources is the single serialization point for offline streams: output
is ordered by timestamp with ties broken by source rank, then id.
"""

from __future__ import annotations

import asyncio
import heapq
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Awaitable, Callable, Iterable, Iterator, Optional

from .irc import frame_to_message, keepalive_response, parse_irc_line, IrcError
from .messages import ChatMessage, Source, merge_key

logger = logging.getLogger(__name__)


class SourceMode(Enum):
    IRC_LIVE = "irc_live"
    LOCAL_ROOM = "local_room"
    REPLAY_FILE = "replay_file"
    SYNTHETIC = "synthetic"

    @classmethod
    def from_token(cls, token: str) -> "SourceMode":
        normalized = token.strip().lower().replace("-", "_")
        aliases = {
            "irc_live": cls.IRC_LIVE,
            "irclive": cls.IRC_LIVE,
            "local_room": cls.LOCAL_ROOM,
            "localroom": cls.LOCAL_ROOM,
            "replay_file": cls.REPLAY_FILE,
            "replayfile": cls.REPLAY_FILE,
            "synthetic": cls.SYNTHETIC,
        }
        if normalized not in aliases:
            raise ValueError(f"unknown source mode: {token!r}")
        return aliases[normalized]


@dataclass(frozen=True)
class SourceConfig:
    mode: SourceMode
    endpoint: str = ""
    channel: str = ""
    credentials: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode in (SourceMode.IRC_LIVE, SourceMode.REPLAY_FILE) and not self.endpoint:
            raise ValueError(f"endpoint required for mode {self.mode.value}")

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "mode": self.mode.value,
            "endpoint": self.endpoint,
            "channel": self.channel,
        }
        if self.credentials is not None:
            data["credentials"] = self.credentials
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SourceConfig":
        return cls(
            mode=SourceMode.from_token(str(data["mode"])),
            endpoint=str(data.get("endpoint", "")),
            channel=str(data.get("channel", "")),
            credentials=data.get("credentials"),
        )


class SourceClosed(Exception):
    """Raised by a stream to signal its own end; never fatal to the merge."""


def _pull(iterator: Iterator[ChatMessage]) -> Optional[ChatMessage]:
    try:
        return next(iterator)
    except (StopIteration, SourceClosed):
        return None


def merge_sources(sources: list[Iterable[ChatMessage]]) -> Iterator[ChatMessage]:
    """K-way merge of individually time-ordered streams into one total order."""
    if not sources:
        raise ValueError("merge_sources requires at least one source")
    iterators = [iter(s) for s in sources]
    heap: list[tuple[tuple[int, int, str], int, ChatMessage]] = []
    for index, iterator in enumerate(iterators):
        message = _pull(iterator)
        if message is not None:
            heapq.heappush(heap, (merge_key(message), index, message))
    while heap:
        _, index, message = heapq.heappop(heap)
        yield message
        refill = _pull(iterators[index])
        if refill is not None:
            heapq.heappush(heap, (merge_key(refill), index, refill))


OnMessage = Callable[[ChatMessage], Awaitable[None]]


class IrcClient:
    """Minimal Twitch-compatible IRC reader with keepalive and reconnect.

    Login sequence: optional tag capability request, PASS (when credentials
    are configured), NICK, JOIN. Without credentials an anonymous read-only
    nick is used. Reconnects with exponential backoff (1s doubling to a 60s
    cap), rejoining the same channel.
    """

    def __init__(
        self,
        config: SourceConfig,
        clock: Any,
        on_message: OnMessage,
        *,
        nick: Optional[str] = None,
        request_tags: bool = True,
        backoff_initial: float = 1.0,
        backoff_cap: float = 60.0,
    ) -> None:
        self.config = config
        self.clock = clock
        self.on_message = on_message
        self.nick = nick or ("storychat_bot" if config.credentials else "justinfan20317")
        self.request_tags = request_tags
        self.backoff_initial = backoff_initial
        self.backoff_cap = backoff_cap
        self._writer: Optional[asyncio.StreamWriter] = None
        self.connections = 0

    def _host_port(self) -> tuple[str, int]:
        host, _, port = self.config.endpoint.rpartition(":")
        if not host:
            raise ValueError(f"endpoint must be host:port, got {self.config.endpoint!r}")
        return host, int(port)

    async def run(self) -> None:
        """Connect-read loop; returns only on cancellation."""
        backoff = self.backoff_initial
        while True:
            try:
                await self._session()
                backoff = self.backoff_initial
            except asyncio.CancelledError:
                raise
            except (OSError, ConnectionError) as exc:
                logger.warning("irc connection lost (%s); reconnecting in %.1fs", exc, backoff)
            await asyncio.sleep(backoff)
            backoff = min(backoff * 2, self.backoff_cap)

    async def _session(self) -> None:
        host, port = self._host_port()
        reader, writer = await asyncio.open_connection(host, port)
        self._writer = writer
        self.connections += 1
        try:
            if self.request_tags:
                await self._send_line("CAP REQ :twitch.tv/tags")
            if self.config.credentials:
                await self._send_line(f"PASS {self.config.credentials}")
            await self._send_line(f"NICK {self.nick}")
            channel = self.config.channel.lstrip("#")
            if channel:
                await self._send_line(f"JOIN #{channel}")
            while True:
                line = await reader.readline()
                if not line:
                    raise ConnectionError("server closed connection")
                await self._handle_line(line.decode("utf-8", errors="replace"))
        finally:
            self._writer = None
            writer.close()

    async def _handle_line(self, raw: str) -> None:
        raw = raw.rstrip("\r\n")
        if not raw:
            return
        try:
            frame = parse_irc_line(raw)
        except IrcError as exc:
            logger.debug("dropping unparseable irc line: %s", exc)
            return
        pong = keepalive_response(frame)
        if pong is not None:
            await self._send_line(pong)
            return
        message = frame_to_message(frame, Source.EXTERNAL, self.clock)
        if message is not None:
            await self.on_message(message)

    async def _send_line(self, line: str) -> None:
        if self._writer is None:
            raise ConnectionError("not connected")
        self._writer.write((line + "\r\n").encode("utf-8"))
        await self._writer.drain()

    async def send_chat(self, text: str) -> None:
        """Outbound PRIVMSG to the joined channel."""
        channel = self.config.channel.lstrip("#")
        await self._send_line(f"PRIVMSG #{channel} :{text}")


class LocalRoomServer:
    """Participant chatroom: newline-delimited JSON {author, body} over TCP.

    Each line becomes a participant-source ChatMessage stamped at ingestion.
    Malformed lines are logged and skipped.
    """

    def __init__(self, endpoint: str, clock: Any, on_message: OnMessage, channel: str = "") -> None:
        self.endpoint = endpoint
        self.clock = clock
        self.on_message = on_message
        self.channel = channel
        self._server: Optional[asyncio.base_events.Server] = None
        self._counter = 0

    @property
    def port(self) -> int:
        assert self._server is not None and self._server.sockets
        return self._server.sockets[0].getsockname()[1]

    async def start(self) -> None:
        host, _, port = self.endpoint.rpartition(":")
        self._server = await asyncio.start_server(self._handle, host or "127.0.0.1", int(port or 0))

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        logger.info("local room: %s connected", peer)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.decode("utf-8", errors="replace").strip()
                if not text:
                    continue
                try:
                    entry = json.loads(text)
                    author = str(entry["author"])
                    body = str(entry["body"]).strip()
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning("local room: bad line from %s (%s)", peer, exc)
                    continue
                if not body:
                    continue
                self._counter += 1
                await self.on_message(
                    ChatMessage(
                        id=f"room-{self._counter}",
                        channel=self.channel,
                        author=author,
                        body=body,
                        timestamp_ms=self.clock.now_ms(),
                        source=Source.PARTICIPANT,
                    )
                )
        finally:
            writer.close()
            logger.info("local room: %s disconnected", peer)
