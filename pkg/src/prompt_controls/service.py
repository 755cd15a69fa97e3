"""HTTP + server-sent-events surface over session runtimes.

All client actions are plain requests; everything the engine does flows
back over one SSE stream per subscriber, resumable with Last-Event-ID
within the per-session ring buffer. Sessions run their streaming work on
a per-session driver thread when the service owns a real clock; under a
virtual clock (tests, transcripts) the caller drives time explicitly.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Callable

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from . import errors as err
from .clock import Clock, RealClock, VirtualClock
from .events import StreamEvent
from .gateway import (
    BackendConfig,
    Gateway,
    LiveGateway,
    RecordingGateway,
    ReplayGateway,
    load_fixture,
)
from .runtime import Session
from .session import Mode, SessionDirectoryStore, snapshot_state

KEEPALIVE_SECONDS = 15.0

_NOT_FOUND = (err.NotFound, err.UnknownTurn, err.UnknownLabel)
_CONFLICT = (err.Busy, err.NotLatestTurn, err.StaticModeViolation, err.DuplicateSessionLabel, err.NoTurns)


def _error_response(exc: err.EngineError) -> JSONResponse:
    if isinstance(exc, _NOT_FOUND):
        status = 404
    elif isinstance(exc, _CONFLICT):
        status = 409
    else:
        status = 422
    return JSONResponse(status_code=status, content={"error": exc.name, "detail": str(exc)})


@dataclass
class ServiceConfig:
    backend: str = "replay"  # live | replay | record
    fixtures_dir: Path | None = None
    fixture_id: str | None = None  # replay: one fixture shared by all sessions
    default_mode: Mode = Mode.DYNAMIC
    store_dir: Path | None = None
    backend_config: BackendConfig = dataclass_field(default_factory=BackendConfig)
    virtual_clock: bool = False

    def validate(self) -> None:
        if self.backend in ("replay",) and self.fixtures_dir is None:
            raise ValueError("replay backend needs --fixtures DIR")
        if self.fixtures_dir is not None and self.backend == "replay" and not Path(self.fixtures_dir).is_dir():
            raise ValueError(f"fixtures directory {self.fixtures_dir} does not exist")


class SessionHandle:
    """One session plus its lock, subscribers, and optional driver thread."""

    def __init__(self, session: Session, clock: Clock, persist_hook: Callable[[], None] | None):
        self.session = session
        self.clock = clock
        self.lock = threading.RLock()
        self.subscribers: list[queue.Queue] = []
        self.wakeup = threading.Event()
        self.stopped = False
        self._persist_hook = persist_hook
        session.add_sink(self._fanout)

    def _fanout(self, event: StreamEvent) -> None:
        for q in list(self.subscribers):
            q.put(event)
        if self._persist_hook and event.kind in (
            "chat_complete", "error", "option_set_complete", "session_options_changed",
        ):
            self._persist_hook()

    def subscribe(self, since: int) -> tuple[list[StreamEvent], queue.Queue] | None:
        with self.lock:
            backlog = self.session.ring.since(since)
            if backlog is None:
                return None
            q: queue.Queue = queue.Queue()
            self.subscribers.append(q)
            return backlog, q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def drive_virtual(self, until: float | None = None) -> None:
        """Advance a virtual clock through all pending work (test/replay driving)."""
        clock = self.clock
        assert isinstance(clock, VirtualClock)
        with self.lock:
            while True:
                self.session.run_ready()
                wake = self.session.next_wake()
                if wake is None:
                    break
                if until is not None and wake > until:
                    break
                clock.set(max(wake, clock.now()))
            if until is not None and until > clock.now():
                clock.set(until)
                self.session.run_ready()


class _Driver(threading.Thread):
    """Real-clock work loop: fires timers and pumps streams for one session."""

    def __init__(self, handle: SessionHandle):
        super().__init__(daemon=True, name=f"session-{handle.session.session_id}")
        self.handle = handle

    def run(self) -> None:
        handle = self.handle
        session = handle.session
        while not handle.stopped:
            with handle.lock:
                session.fire_due_timer()
                pump = session.ready_pump()
                wake = session.next_wake() if pump is None else None
            if pump is not None:
                kind, payload = pump.fetch(handle.clock.now())  # may block on the socket
                with handle.lock:
                    pump.apply(kind, payload, handle.clock.now())
                continue
            now = handle.clock.now()
            timeout = KEEPALIVE_SECONDS if wake is None else max(0.0, min(wake - now, KEEPALIVE_SECONDS))
            handle.wakeup.wait(timeout=timeout)
            handle.wakeup.clear()


class SessionManager:
    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        self.store = SessionDirectoryStore(config.store_dir) if config.store_dir else None
        self.handles: dict[str, SessionHandle] = {}
        self._lock = threading.Lock()

    def _make_gateway(self, session_id: str) -> Gateway:
        config = self.config
        if config.backend == "live":
            return LiveGateway(config.backend_config)
        if config.backend == "record":
            fixtures = Path(config.fixtures_dir or ".")
            fixtures.mkdir(parents=True, exist_ok=True)
            return RecordingGateway(
                LiveGateway(config.backend_config), session_id, fixtures / f"{session_id}.fixture.json"
            )
        fixtures = Path(config.fixtures_dir)
        fixture_id = config.fixture_id or session_id
        path = fixtures / f"{fixture_id}.fixture.json"
        if not path.exists():
            raise err.NotFound(f"fixture {path.name}")
        return ReplayGateway(load_fixture(path))

    def _make_clock(self) -> Clock:
        return VirtualClock() if self.config.virtual_clock else RealClock()

    def _wrap(self, session: Session, clock: Clock) -> SessionHandle:
        persist = None
        if self.store is not None:
            store = self.store
            persist = lambda: store.save(session.state)  # noqa: E731
        handle = SessionHandle(session, clock, persist)
        self.handles[session.session_id] = handle
        if not self.config.virtual_clock:
            _Driver(handle).start()
        return handle

    def create(self, mode: Mode | None, session_id: str | None) -> SessionHandle:
        with self._lock:
            if session_id and session_id in self.handles:
                raise err.Busy(f"session {session_id!r} already exists")
            clock = self._make_clock()
            session = Session(
                session_id=session_id,
                mode=mode or self.config.default_mode,
                gateway=self._make_gateway(session_id or "session"),
                clock=clock,
                store=self.store,
            )
            return self._wrap(session, clock)

    def get(self, session_id: str) -> SessionHandle:
        with self._lock:
            handle = self.handles.get(session_id)
            if handle is not None:
                return handle
            if self.store is not None:
                clock = self._make_clock()
                session = Session.load(
                    session_id, self.store, self._make_gateway(session_id), clock=clock
                )
                return self._wrap(session, clock)
            raise err.NotFound(session_id)

    def notify(self, handle: SessionHandle) -> None:
        handle.wakeup.set()


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="prompt-controls", docs_url=None, redoc_url=None)
    app.state.manager = manager

    @app.exception_handler(err.EngineError)
    async def engine_error_handler(_request: Request, exc: err.EngineError):
        return _error_response(exc)

    def mutate(handle: SessionHandle, fn: Callable[[Session], Any]) -> Any:
        with handle.lock:
            result = fn(handle.session)
        manager.notify(handle)
        return result

    @app.post("/sessions", status_code=201)
    async def create_session(body: dict = None):  # type: ignore[assignment]
        body = body or {}
        mode = Mode(body["mode"]) if "mode" in body else None
        handle = manager.create(mode, body.get("id"))
        with handle.lock:
            return {
                "session_id": handle.session.session_id,
                "mode": handle.session.state.mode.value,
                "revision": handle.session.revision,
            }

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        handle = manager.get(session_id)
        with handle.lock:
            return snapshot_state(handle.session.state)

    @app.post("/sessions/{session_id}/messages", status_code=202)
    async def post_message(session_id: str, body: dict):
        handle = manager.get(session_id)
        text = body.get("text", "")
        turn_id = mutate(handle, lambda s: s.submit_prompt(text))
        with handle.lock:
            return {"turn_id": turn_id, "revision": handle.session.revision}

    @app.patch("/sessions/{session_id}/turns/{turn_id}/options/{label}")
    async def patch_option(session_id: str, turn_id: int, label: str, body: dict):
        handle = manager.get(session_id)
        if "value" not in body:
            raise err.ShapeMismatch("request body needs a 'value' field")
        revision = mutate(handle, lambda s: s.update_inline_option(turn_id, label, body["value"]))
        return {"revision": revision}

    @app.post("/sessions/{session_id}/turns/{turn_id}/options/{label}/pin")
    async def pin_option(session_id: str, turn_id: int, label: str):
        handle = manager.get(session_id)
        revision = mutate(handle, lambda s: s.pin_option(turn_id, label))
        return {"revision": revision}

    @app.post("/sessions/{session_id}/session-options/{label}/unpin")
    async def unpin_option(session_id: str, label: str):
        handle = manager.get(session_id)
        revision = mutate(handle, lambda s: s.unpin_option(label))
        return {"revision": revision}

    @app.post("/sessions/{session_id}/controls", status_code=202)
    async def request_controls(session_id: str, body: dict):
        handle = manager.get(session_id)
        utterance = body.get("utterance", "")
        revision = mutate(handle, lambda s: s.request_session_options(utterance))
        return {"revision": revision}

    @app.get("/sessions/{session_id}/session-options")
    async def export_options(session_id: str):
        handle = manager.get(session_id)
        with handle.lock:
            text = handle.session.export_session_options()
        return Response(content=text, media_type="application/json")

    @app.put("/sessions/{session_id}/session-options")
    async def import_options(session_id: str, request: Request):
        handle = manager.get(session_id)
        text = (await request.body()).decode("utf-8")
        revision = mutate(handle, lambda s: s.import_session_options(text))
        return {"revision": revision}

    @app.delete("/sessions/{session_id}/options/{tier}/{label}")
    async def delete_option(session_id: str, tier: str, label: str):
        handle = manager.get(session_id)
        revision = mutate(handle, lambda s: s.delete_option(tier, label))
        return {"revision": revision}

    @app.get("/sessions/{session_id}/events")
    async def events(session_id: str, request: Request, since: int | None = None,
                     idle: float | None = None):
        """SSE stream of session events from a revision onward.

        ``idle`` (seconds) ends the stream after a quiet period instead of
        keeping it open with keep-alives; clients resume with Last-Event-ID.
        """
        handle = manager.get(session_id)
        last_id = since
        if last_id is None:
            header = request.headers.get("last-event-id")
            last_id = int(header) if header else 0
        subscription = handle.subscribe(last_id)
        if subscription is None:
            return JSONResponse(
                status_code=409,
                content={"error": "EventsEvicted", "detail": "revision no longer buffered; refetch the snapshot"},
            )
        backlog, q = subscription

        def stream():
            try:
                for event in backlog:
                    yield event.to_sse()
                while not handle.stopped:
                    try:
                        event = q.get(timeout=idle if idle is not None else KEEPALIVE_SECONDS)
                    except queue.Empty:
                        if idle is not None:
                            return
                        yield ": keep-alive\n\n"
                        continue
                    yield event.to_sse()
            finally:
                handle.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def build_service(config: ServiceConfig) -> FastAPI:
    return create_app(SessionManager(config))
