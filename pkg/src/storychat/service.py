"""Long-running engine service: ingestion, pipeline loop, fan-out, admin API.

One asyncio task owns the pipeline and consumes a single command queue;
sources, admin requests, and state queries are all serialized through it, so
every mutation happens in one total order. WebSocket fan-out happens after
ordering is fixed: publish never blocks, and a client that falls more than
1000 updates behind is dropped rather than stalling the pipeline.

Admin HTTP (JSON bodies) and the client WebSocket share one listen address:

    POST /admin/threshold {value}      POST /admin/mode {mode}
    POST /admin/filter {...}           POST /admin/notice {text}
    POST /admin/viewers {count}        GET  /state
    POST /chat {author, body}          WS   /ws
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .clock import SessionClock
from .config import EngineConfig, load_engine_config
from .messages import ChatMessage, Source
from .pipeline import (
    ClientUpdate,
    EmptyBody,
    EmptyNotice,
    EngineError,
    InvalidValue,
    Pipeline,
    Unauthenticated,
)
from .sessionlog import (
    Mode,
    SessionLogWriter,
    SessionManifest,
    load,
    replay,
)
from .sim import SyntheticSource, TrafficProfile
from .sources import IrcClient, LocalRoomServer, SourceMode

logger = logging.getLogger(__name__)

ADVANCE_INTERVAL_S = 0.2
CLIENT_BUFFER_UPDATES = 1000


@dataclass
class HubClient:
    id: int
    queue: asyncio.Queue = field(
        default_factory=lambda: asyncio.Queue(maxsize=CLIENT_BUFFER_UPDATES)
    )
    dropped: bool = False


class ClientHub:
    """Non-blocking fan-out. Slow clients are cut off, never waited on."""

    def __init__(self) -> None:
        self._clients: dict[int, HubClient] = {}
        self._next_id = 0
        self.published = 0

    def subscribe(self) -> HubClient:
        self._next_id += 1
        client = HubClient(id=self._next_id)
        self._clients[client.id] = client
        return client

    def unsubscribe(self, client_id: int) -> None:
        self._clients.pop(client_id, None)

    def publish(self, update: ClientUpdate) -> None:
        self.published += 1
        for client in list(self._clients.values()):
            if client.dropped:
                continue
            try:
                client.queue.put_nowait(update)
            except asyncio.QueueFull:
                client.dropped = True
                logger.warning("dropping client %d: %d updates behind", client.id, client.queue.qsize())

    @property
    def client_count(self) -> int:
        return len(self._clients)


# Commands serialized into the pipeline loop.


@dataclass
class MessageCmd:
    message: ChatMessage
    receipt: float


@dataclass
class RawCmd:
    id: str
    author: str
    body: str
    source: Source
    channel: str
    receipt: float


@dataclass
class AdvanceCmd:
    t_ms: int


@dataclass
class CallCmd:
    fn: Any  # Callable[[Pipeline], Any]
    future: asyncio.Future


@dataclass
class StopCmd:
    pass


class EngineService:
    """Owns the session: clock, log writer, pipeline, sources, fan-out hub."""

    def __init__(
        self,
        config: EngineConfig,
        *,
        session_id: Optional[str] = None,
        replay_speed: float = 1.0,
    ) -> None:
        self.config = config
        self.replay_speed = replay_speed
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.clock = SessionClock()
        # Wall modes advance logical time from the clock; replay and synthetic
        # sources carry their own logical timestamps and watermarks.
        self.wall_driven = config.source.mode in (SourceMode.IRC_LIVE, SourceMode.LOCAL_ROOM)

        log_dir = Path(config.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = log_dir / f"{self.session_id}.jsonl"
        manifest = SessionManifest(
            session_id=self.session_id,
            started_at=datetime.now(timezone.utc).isoformat(),
            mode=config.mode,
            configs={
                "classifier": config.classifier.to_dict(),
                "detector": config.detector.to_dict(),
                "fsm": config.fsm.to_dict(),
            },
            stream_meta={
                "channel": config.source.channel,
                "nominal_viewers": config.nominal_viewers,
            },
        )
        self.writer = SessionLogWriter(self.log_path, manifest)
        self.hub = ClientHub()
        self.pipeline = Pipeline(config, log_sink=self.writer.append, update_sink=self.hub.publish)

        self.queue: asyncio.Queue = asyncio.Queue()
        self.latency_samples: deque[float] = deque(maxlen=120_000)
        self._tasks: list[asyncio.Task] = []
        self._raw_counter = 0
        self.local_room: Optional[LocalRoomServer] = None
        self.irc_client: Optional[IrcClient] = None
        self.source_task: Optional[asyncio.Task] = None

    # ------------------------------------------------------------- lifecycle

    async def start(self) -> None:
        self._tasks.append(asyncio.create_task(self._loop(), name="pipeline-loop"))
        mode = self.config.source.mode
        if mode is SourceMode.IRC_LIVE:
            self.irc_client = IrcClient(self.config.source, self.clock, self.ingest)
            self._tasks.append(asyncio.create_task(self.irc_client.run(), name="irc-source"))
        elif mode is SourceMode.LOCAL_ROOM:
            endpoint = self.config.source.endpoint or "127.0.0.1:0"
            self.local_room = LocalRoomServer(
                endpoint, self.clock, self.ingest, channel=self.config.source.channel
            )
            await self.local_room.start()
        elif mode is SourceMode.REPLAY_FILE:
            _, records = load(self.config.source.endpoint)
            self.source_task = asyncio.create_task(self._run_replay(records), name="replay-source")
            self._tasks.append(self.source_task)
        elif mode is SourceMode.SYNTHETIC:
            self.source_task = asyncio.create_task(self._run_synthetic(), name="synthetic-source")
            self._tasks.append(self.source_task)
        if self.wall_driven:
            self._tasks.append(asyncio.create_task(self._advance_timer(), name="advance-timer"))
        logger.info("session %s started (source=%s, mode=%s)", self.session_id, mode.value, self.config.mode.value)

    async def stop(self) -> None:
        await self.queue.put(StopCmd())
        for task in self._tasks:
            if not task.done():
                task.cancel()
        for task in self._tasks:
            try:
                await task
            except (asyncio.CancelledError, Exception):
                pass
        if self.local_room is not None:
            await self.local_room.stop()
        self.writer.close()
        logger.info("session %s stopped", self.session_id)

    # ----------------------------------------------------------------- loop

    async def _loop(self) -> None:
        while True:
            cmd = await self.queue.get()
            if isinstance(cmd, StopCmd):
                break
            try:
                self._dispatch(cmd)
            except EngineError:
                raise  # surfaced through CallCmd futures; not reachable here
            except Exception:
                logger.exception("pipeline error; skipping command %r", type(cmd).__name__)

    def _dispatch(self, cmd: Any) -> None:
        if isinstance(cmd, MessageCmd):
            self.pipeline.process_message(cmd.message)
            self.latency_samples.append(time.monotonic() - cmd.receipt)
        elif isinstance(cmd, RawCmd):
            stamped = ChatMessage(
                id=cmd.id,
                channel=cmd.channel,
                author=cmd.author,
                body=cmd.body,
                timestamp_ms=self._ingest_now_ms(),
                source=cmd.source,
            )
            self.pipeline.process_message(stamped)
            self.latency_samples.append(time.monotonic() - cmd.receipt)
        elif isinstance(cmd, AdvanceCmd):
            self.pipeline.advance_to(cmd.t_ms)
        elif isinstance(cmd, CallCmd):
            try:
                cmd.future.set_result(cmd.fn(self.pipeline))
            except Exception as exc:
                cmd.future.set_exception(exc)

    def _ingest_now_ms(self) -> int:
        if self.wall_driven:
            return max(self.clock.now_ms(), self.pipeline.now_ms)
        return self.pipeline.now_ms

    async def _advance_timer(self) -> None:
        while True:
            await asyncio.sleep(ADVANCE_INTERVAL_S)
            self.queue.put_nowait(AdvanceCmd(self.clock.now_ms()))

    async def _run_replay(self, records: list) -> None:
        await replay(
            records,
            self.replay_speed,
            sink=self.ingest,
            watermark=self._watermark,
            watermark_interval_ms=min(1000, self.pipeline.window_ms),
        )
        logger.info("replay finished at logical %d ms", self.pipeline.now_ms)

    async def _run_synthetic(self) -> None:
        source = SyntheticSource.from_endpoint(self.config.source.endpoint)
        await source.run(sink=self.ingest, watermark=self._watermark)
        logger.info("synthetic source finished at logical %d ms", self.pipeline.now_ms)

    async def _watermark(self, t_ms: int) -> None:
        await self.queue.put(AdvanceCmd(t_ms))

    # ------------------------------------------------------------- ingestion

    async def ingest(self, message: ChatMessage) -> None:
        """Entry point for every source; receipt time starts the latency clock."""
        await self.queue.put(MessageCmd(message=message, receipt=time.monotonic()))

    def submit_comment(self, author: str, body: str, token: Optional[str] = None) -> str:
        """Queue a participant comment; returns its message id immediately."""
        if self.config.participant_token is not None and token != self.config.participant_token:
            raise Unauthenticated("participant token missing or wrong")
        body = (body or "").strip()
        if not body:
            raise EmptyBody("comment body must be non-empty")
        self._raw_counter += 1
        message_id = f"p-{self._raw_counter}"
        self.queue.put_nowait(
            RawCmd(
                id=message_id,
                author=author or "participant",
                body=body,
                source=Source.PARTICIPANT,
                channel=self.config.source.channel,
                receipt=time.monotonic(),
            )
        )
        return message_id

    # ----------------------------------------------------------------- admin

    async def call_in_loop(self, fn: Any) -> Any:
        """Run fn(pipeline) inside the loop; ordering point for admin ops."""
        future: asyncio.Future = asyncio.get_running_loop().create_future()
        await self.queue.put(CallCmd(fn=fn, future=future))
        return await future

    async def wait_source_complete(self) -> None:
        """Await a finite source (replay/synthetic), then drain the queue."""
        if self.source_task is not None:
            await self.source_task
        await self.call_in_loop(lambda p: None)

    async def get_state(self) -> dict[str, Any]:
        snapshot = await self.call_in_loop(lambda p: p.state_snapshot())
        snapshot["session_id"] = self.session_id
        snapshot["clients"] = self.hub.client_count
        return snapshot

    def latency_p99_ms(self) -> float:
        if not self.latency_samples:
            return 0.0
        ordered = sorted(self.latency_samples)
        index = min(len(ordered) - 1, int(len(ordered) * 0.99))
        return ordered[index] * 1000.0


def create_app(service: EngineService) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        await service.start()
        try:
            yield
        finally:
            await service.stop()

    app = FastAPI(title="storychat engine", lifespan=lifespan)

    def check_admin(request: Request) -> None:
        required = service.config.admin_token
        if required is not None and request.headers.get("x-admin-token") != required:
            raise HTTPException(status_code=401, detail="admin token missing or wrong")

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        status = 401 if isinstance(exc, Unauthenticated) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.post("/admin/threshold")
    async def admin_threshold(request: Request):
        check_admin(request)
        payload = await request.json()
        if "value" not in payload:
            raise InvalidValue("missing field: value")
        try:
            value = float(payload["value"])
        except (TypeError, ValueError):
            raise InvalidValue(f"threshold must be a number, got {payload['value']!r}")
        return await service.call_in_loop(lambda p: p.set_threshold(value))

    @app.post("/admin/filter")
    async def admin_filter(request: Request):
        check_admin(request)
        payload = await request.json()
        return await service.call_in_loop(lambda p: p.set_filter(payload))

    @app.post("/admin/mode")
    async def admin_mode(request: Request):
        check_admin(request)
        payload = await request.json()
        try:
            mode = Mode.from_token(str(payload.get("mode", "")))
        except ValueError as exc:
            raise InvalidValue(str(exc))
        return await service.call_in_loop(lambda p: p.set_mode(mode))

    @app.post("/admin/notice")
    async def admin_notice(request: Request):
        check_admin(request)
        payload = await request.json()
        return await service.call_in_loop(lambda p: p.notice(str(payload.get("text", ""))))

    @app.post("/admin/viewers")
    async def admin_viewers(request: Request):
        check_admin(request)
        payload = await request.json()
        if "count" not in payload:
            raise InvalidValue("missing field: count")
        try:
            count = int(payload["count"])
        except (TypeError, ValueError):
            raise InvalidValue(f"viewer count must be an integer, got {payload['count']!r}")
        return await service.call_in_loop(lambda p: p.set_viewers(count))

    @app.get("/state")
    async def get_state():
        return await service.get_state()

    @app.post("/chat")
    async def post_chat(request: Request):
        payload = await request.json()
        message_id = service.submit_comment(
            author=str(payload.get("author", "")),
            body=str(payload.get("body", "")),
            token=request.headers.get("x-participant-token"),
        )
        return {"ok": True, "id": message_id}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        client = service.hub.subscribe()
        try:
            while True:
                update: ClientUpdate = await client.queue.get()
                if client.dropped:
                    break
                await ws.send_text(json.dumps(update.to_dict(), separators=(",", ":")))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            service.hub.unsubscribe(client.id)
            try:
                await ws.close()
            except RuntimeError:
                pass

    ui_dir = Path("frontend/dist")
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="storychat-engine", description=__doc__)
    parser.add_argument("--config", type=Path, help="engine config JSON")
    parser.add_argument("--replay", type=Path, help="session log to replay as the source")
    parser.add_argument("--speed", type=float, default=1.0, help="replay speed multiplier")
    parser.add_argument("--listen", help="host:port to serve on (overrides config)")
    parser.add_argument("--log-dir", type=Path, help="session log directory (overrides config)")
    parser.add_argument("--session-id", help="explicit session id (default: random)")
    args = parser.parse_args(argv)

    config = load_engine_config(args.config) if args.config else EngineConfig()
    if args.replay:
        from .sources import SourceConfig

        config = config.with_updates(
            source=SourceConfig(mode=SourceMode.REPLAY_FILE, endpoint=str(args.replay))
        )
    if args.listen:
        config = config.with_updates(listen_address=args.listen)
    if args.log_dir:
        config = config.with_updates(log_dir=str(args.log_dir))

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s %(message)s")
    service = EngineService(config, session_id=args.session_id, replay_speed=args.speed)
    app = create_app(service)

    host, _, port = config.listen_address.rpartition(":")
    import uvicorn

    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8710), log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
