"""Relay service: telemetry ingestion, advisory session API, UI push stream.

One advisory session per server instance.  Session mutations are serialized
on the event loop behind a lock so telemetry triggers and UI events apply
in arrival order.  Generation (retrieval, prompt assembly, chat backend)
runs off the request path; at most one generation is in flight and a newer
GENERATE action supersedes it.
"""

from __future__ import annotations

import argparse
import asyncio
import enum
import json
import logging
import socket
import sys
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .advisor import (
    Action,
    AdvisorError,
    AdvisorSettings,
    AdvisorySession,
    MockChatClient,
    RemoteChatClient,
    Role,
    UiEvent,
    UiEventKind,
    assemble_prompt,
    build_retrieval_query,
    manage_context,
)
from .airports import (
    AirportDb,
    AirportError,
    FileMetarSource,
    HttpMetarSource,
    attach_weather,
    load_airport_db,
    nearby_airports,
)
from .config import ConfigError, ServerConfig, load_config, validate_config
from .retrieval import (
    EmbedderMismatch,
    LocalHashingEmbedder,
    RemoteEmbedder,
    RetrievalError,
    VectorIndex,
    build_index,
    load_index,
    query_top_k,
    save_index,
)
from .telemetry import (
    InvalidField,
    MalformedMessage,
    TelemetryStore,
    detect_trigger,
    parse_telemetry_message,
)

log = logging.getLogger(__name__)

# Idle SSE connections get a comment line at this cadence so intermediaries
# keep them open and disconnects are noticed without waiting on a frame.
SSE_KEEPALIVE_S = 0.5


class RelayError(Exception):
    pass


class PortInUse(RelayError):
    pass


class FrameKind(enum.Enum):
    STATE_CHANGED = "STATE_CHANGED"
    ADVISORY = "ADVISORY"
    ERROR = "ERROR"


def _frame(kind: FrameKind, state: str, seq: int, text: str | None = None) -> dict:
    frame = {"kind": kind.value, "state": state, "seq": seq}
    if text is not None:
        frame["text"] = text
    return frame


class RelaySession:
    """All mutable server state plus the loaded resources it advises from."""

    def __init__(
        self,
        config: ServerConfig,
        index: VectorIndex,
        airport_db: AirportDb,
        provider,
        chat_client,
        metar_source=None,
    ):
        self.config = config
        self.index = index
        self.airport_db = airport_db
        self.provider = provider
        self.chat_client = chat_client
        self.metar_source = metar_source
        self.store = TelemetryStore()
        self.session = AdvisorySession(
            AdvisorSettings(
                interactive_sticky=config.advisor.interactive_sticky,
                alert_preempts=config.advisor.alert_preempts,
                token_budget=config.advisor.token_budget,
                system_prompt=config.advisor.system_prompt,
            )
        )
        self.seq = 0
        self.last_advisory: str | None = None
        self._subscribers: set[asyncio.Queue] = set()
        self._lock = asyncio.Lock()
        self._gen_id = 0
        self._gen_task: asyncio.Task | None = None

    # -- push stream -------------------------------------------------------

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self._subscribers.add(queue)
        # Connect snapshot: late subscribers learn the current state at once.
        queue.put_nowait(_frame(FrameKind.STATE_CHANGED, self.session.state.value, self.seq))
        return queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        self._subscribers.discard(queue)

    def _broadcast(self, kind: FrameKind, text: str | None = None) -> None:
        self.seq += 1
        frame = _frame(kind, self.session.state.value, self.seq, text)
        for queue in self._subscribers:
            queue.put_nowait(frame)

    # -- session mutations -------------------------------------------------

    async def apply_event(self, event: UiEvent) -> str:
        """Apply a UI or alert event; returns the resulting state name."""
        async with self._lock:
            before = self.session.state
            new_state, action = self.session.apply_event(event)
            if action is Action.CLEAR_CONTEXT:
                self._supersede()
                self.last_advisory = None
            if new_state is not before:
                self._broadcast(FrameKind.STATE_CHANGED)
            if action in (Action.GENERATE_ADVISORY, Action.GENERATE_REPLY):
                self._start_generation(event.text)
            return new_state.value

    def _supersede(self) -> None:
        self._gen_id += 1
        if self._gen_task is not None and not self._gen_task.done():
            self._gen_task.cancel()

    def _start_generation(self, user_text: str | None) -> None:
        self._supersede()
        self._gen_task = asyncio.create_task(self._generate(self._gen_id, user_text))

    def _gather(self, flight, query: str):
        retrieved = query_top_k(self.index, query, self.provider, k=self.config.retrieval.k)
        alternates = nearby_airports(
            self.airport_db,
            (flight.latitude_deg, flight.longitude_deg),
            radius_nm=self.config.alternates.radius_nm,
            min_runway_ft=self.config.alternates.min_runway_ft,
            max_results=self.config.alternates.max_results,
        )
        if self.metar_source is not None:
            alternates = attach_weather(alternates, self.metar_source)
        return retrieved, alternates

    async def _generate(self, gen_id: int, user_text: str | None) -> None:
        try:
            latest = self.store.latest()
            if latest is None:
                if gen_id == self._gen_id:
                    self._broadcast(FrameKind.ERROR, text="no telemetry received yet")
                return
            flight, ecam = latest
            query = build_retrieval_query(flight, ecam, user_text)
            retrieved, alternates = await asyncio.to_thread(self._gather, flight, query)
            if gen_id != self._gen_id:
                return
            _, rendered = assemble_prompt(
                flight, ecam, retrieved, alternates, self.session.context, user_text
            )
            reply = await asyncio.to_thread(self.chat_client.complete, rendered)
            if gen_id != self._gen_id:
                return
            manage_context(self.session.context, (Role.USER, rendered[-1]["content"]))
            manage_context(self.session.context, (Role.ASSISTANT, reply))
            self.last_advisory = reply
            self._broadcast(FrameKind.ADVISORY, text=reply)
        except asyncio.CancelledError:
            raise
        except (AdvisorError, RetrievalError, AirportError) as exc:
            log.error("generation failed: %s", exc)
            if gen_id == self._gen_id:
                self._broadcast(FrameKind.ERROR, text=str(exc))

    async def ingest_telemetry(self, raw: bytes) -> None:
        """Parse, store, and inject a MASTER_ALERT on a warning/caution edge."""
        state, ecam = parse_telemetry_message(raw)
        accepted, prev = self.store.advance(state, ecam)
        if not accepted:
            raise InvalidField("timestamp_ms", "older than the stored snapshot")
        trigger = detect_trigger(prev, state, ecam)
        if trigger is not None:
            await self.apply_event(UiEvent(kind=UiEventKind.MASTER_ALERT, alert=trigger))

    def state_document(self) -> dict:
        doc = {"state": self.session.state.value, "seq": self.seq}
        if self.last_advisory is not None:
            doc["last_advisory"] = self.last_advisory
        return doc


_EVENT_KINDS = {
    "query": UiEventKind.QUERY_BUTTON,
    "arm": UiEventKind.ARM_BUTTON,
    "submit": UiEventKind.SUBMIT_TEXT,
}


def create_app(relay: RelaySession, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="leraat relay", version=__version__)
    app.state.relay = relay

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/api/v1/telemetry", status_code=204)
    async def telemetry(request: Request):
        raw = await request.body()
        try:
            await relay.ingest_telemetry(raw)
        except MalformedMessage as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        except InvalidField as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        return Response(status_code=204)

    @app.post("/api/v1/event")
    async def event(request: Request):
        try:
            body = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            return JSONResponse({"detail": "body must be a JSON object"}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"detail": "body must be a JSON object"}, status_code=400)
        kind = _EVENT_KINDS.get(body.get("event"))
        if kind is None:
            return JSONResponse({"detail": f"unknown event: {body.get('event')!r}"}, status_code=400)
        text = body.get("text")
        if kind is UiEventKind.SUBMIT_TEXT:
            if not isinstance(text, str) or not text.strip():
                return JSONResponse({"detail": "submit requires non-empty text"}, status_code=400)
            ui_event = UiEvent(kind=kind, text=text)
        else:
            ui_event = UiEvent(kind=kind)
        state = await relay.apply_event(ui_event)
        return {"state": state}

    @app.get("/api/v1/state")
    async def state():
        return relay.state_document()

    @app.get("/api/v1/stream")
    async def stream(request: Request):
        queue = relay.subscribe()

        async def frames():
            try:
                while True:
                    try:
                        frame = await asyncio.wait_for(queue.get(), timeout=SSE_KEEPALIVE_S)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(frame)}\n\n"
            finally:
                relay.unsubscribe(queue)

        return StreamingResponse(
            frames(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _make_embedding_provider(config: ServerConfig):
    if config.retrieval.embedder == "remote":
        return RemoteEmbedder(
            base_url=config.retrieval.remote_url,
            model=config.retrieval.remote_model,
            api_key=config.llm.api_key or None,
        )
    return LocalHashingEmbedder(dim=config.retrieval.local_dim)


def _make_chat_client(config: ServerConfig):
    if config.llm.backend == "remote":
        return RemoteChatClient(
            base_url=config.llm.base_url,
            model=config.llm.model,
            api_key=config.llm.api_key or None,
            timeout_s=config.llm.timeout_s,
            max_attempts=config.llm.max_attempts,
        )
    return MockChatClient()


def load_resources(config: ServerConfig, rebuild_index: bool = False) -> RelaySession:
    """Validate config, load every referenced resource, and fail fast by name."""
    validate_config(config)
    airport_db = load_airport_db(config.paths.airport_db)
    provider = _make_embedding_provider(config)

    index_path = Path(config.paths.index_file) if config.paths.index_file else None
    if not rebuild_index and index_path is not None and index_path.is_file():
        index = load_index(index_path)
        if index.embedder_id != provider.embedder_id:
            raise EmbedderMismatch(
                f"index {index_path} built with {index.embedder_id!r}, "
                f"configured provider is {provider.embedder_id!r}"
            )
    else:
        index = build_index(
            config.paths.corpus_dir,
            chunk_size=config.retrieval.chunk_size,
            overlap=config.retrieval.overlap,
            provider=provider,
        )
        if index_path is not None:
            save_index(index, index_path)
            log.info("index written to %s", index_path)

    metar_source = None
    if config.paths.metar_file:
        metar_source = FileMetarSource(config.paths.metar_file)
    elif config.paths.metar_url:
        metar_source = HttpMetarSource(config.paths.metar_url)

    return RelaySession(
        config=config,
        index=index,
        airport_db=airport_db,
        provider=provider,
        chat_client=_make_chat_client(config),
        metar_source=metar_source,
    )


def _claim_port(host: str, port: int) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from None
    sock.listen(128)
    return sock


def serve(config: ServerConfig, rebuild_index: bool = False, ui_dir: str | Path | None = None) -> None:
    """Blocking entry point: load resources, claim the port, run uvicorn."""
    relay = load_resources(config, rebuild_index=rebuild_index)
    app = create_app(relay, ui_dir=ui_dir)
    sock = _claim_port(config.server.host, config.server.port)
    log.info("relay listening on %s:%d", config.server.host, config.server.port)
    server = uvicorn.Server(uvicorn.Config(app, log_level="info"))
    server.run(sockets=[sock])


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="leraat-relay", description="Run the advisory relay server")
    parser.add_argument("--config", required=True, help="YAML config file")
    parser.add_argument(
        "--build-index", action="store_true",
        help="rebuild the manual index from the corpus before serving",
    )
    parser.add_argument("--ui-dir", default="", help="directory of built UI assets to serve at /ui")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        serve(load_config(args.config), rebuild_index=args.build_index, ui_dir=args.ui_dir or None)
    except (ConfigError, RelayError, RetrievalError, AirportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
