"""Per-session orchestration: option generation, chat generation, reactivity.

A session is a single logical writer. Mutations run synchronously and
emit exactly one wire event each; streaming work (option decode, chat
deltas) is carried by pumps that the owner drives one stream event at a
time. Pumps never block the state: ``fetch`` (may block on a live
socket) is separate from ``apply`` (mutates state), so a service can
fetch outside its session lock.

Reactivity: any change to the effective refinements schedules a
regeneration of the latest response after a debounce window; changes
inside the window coalesce into one regeneration, and starting a new
generation cancels the in-flight one. A cancelled generation can never
publish its text: completion requests carry monotone sequence numbers
and only the current one may apply.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from typing import Any, Callable

from . import events as ev
from .assembly import AssembledPrompt, assemble_chat_prompt, assemble_option_prompt, serialize_refinements
from .clock import Clock, RealClock
from .decoding import DecodeEvent, DecodeEventKind, StreamingOptionDecoder
from .errors import (
    Busy,
    DuplicateSessionLabel,
    EmptyPrompt,
    EngineError,
    NoTurns,
    NotLatestTurn,
    StaticModeViolation,
    TransportError,
    UnknownLabel,
    UnknownTurn,
)
from .events import EventRing, StreamEvent
from .gateway import CHUNK, WAIT, CompletionRequest, Gateway
from .generation import INLINE, SESSION, GenerationOutcome, GenerationRequest, RuleEnforcer
from .options import (
    Origin,
    OptionSet,
    encode_document,
    encode_option,
    merge_dedupe,
    parse_option_document,
    set_value,
)
from .session import (
    ChatTurn,
    Mode,
    SessionDirectoryStore,
    SessionState,
    TurnStatus,
    load_static_preset,
)

DEBOUNCE_SECONDS = 0.25

CAUSE_INITIAL = "initial"
CAUSE_OPTION_CHANGED = "option_changed"
CAUSE_SESSION_OPTIONS_CHANGED = "session_options_changed"

SESSION_TIER = "session"
INLINE_TIER = "inline"

_TRANSPORT = "transport_error"


@dataclass(frozen=True)
class ChatRequest:
    session_id: str
    turn_id: int
    prompt: AssembledPrompt
    cause: str


class _Pump:
    """One in-flight completion; stepped by the session driver."""

    def __init__(self, session: "Session", stream, purpose: str):
        self.session = session
        self.stream = stream
        self.purpose = purpose
        self.wait_until: float | None = None
        self.cancelled = False
        self.finished = False

    def fetch(self, now: float) -> tuple[str, Any]:
        try:
            return self.stream.next_event(now)
        except TransportError as exc:
            return _TRANSPORT, exc

    def apply(self, kind: str, payload: Any, now: float) -> None:
        if self.cancelled or self.finished:
            return
        if kind == WAIT:
            self.wait_until = payload
            return
        self.wait_until = None
        self._handle(kind, payload, now)

    def _handle(self, kind: str, payload: Any, now: float) -> None:
        raise NotImplementedError

    def close(self) -> None:
        self.cancelled = True
        try:
            self.stream.close()
        except Exception:
            pass


class _OptionPump(_Pump):
    """Streams an option document, filtering it through the generation rules."""

    MAX_ATTEMPTS = 2

    def __init__(self, session: "Session", request: GenerationRequest, turn_id: int | None):
        self.request = request
        self.turn_id = turn_id
        self.attempt = 1
        self.prompt_text = assemble_option_prompt(
            list(request.history), request.latest_input, request.existing
        )
        self._origin = Origin.GENERATED_INLINE if request.kind == INLINE else Origin.GENERATED_SESSION
        stream = session._open_completion(
            CompletionRequest(purpose="options", system_text=self.prompt_text)
        )
        super().__init__(session, stream, "options")
        self._reset_decode()

    def _reset_decode(self) -> None:
        self.decoder = StreamingOptionDecoder(origin=self._origin)
        self.enforcer = RuleEnforcer(self.request.existing)
        self.raw_parts: list[str] = []

    def _handle(self, kind: str, payload: Any, now: float) -> None:
        if kind == _TRANSPORT:
            self._finish_failed("BackendError", str(payload))
            return
        if kind == CHUNK:
            self.raw_parts.append(payload)
            if self.decoder.terminal or self.decoder.document_completed:
                return
            for event in self.decoder.feed(payload):
                self._on_decode_event(event)
                if self.finished:
                    return
            return
        # DONE
        if self.decoder.document_completed:
            return  # outcome already published from document_completed
        try:
            self.decoder.finalize()
        except EngineError as exc:
            self._decode_failed(str(exc))

    def _on_decode_event(self, event: DecodeEvent) -> None:
        session = self.session
        if event.kind == DecodeEventKind.OPTION_STARTED:
            session._emit(ev.OPTION_DELTA, self.turn_id, {
                "phase": "started", "tier": self.request.kind, "index": event.index,
            })
        elif event.kind == DecodeEventKind.OPTION_FIELD:
            session._emit(ev.OPTION_DELTA, self.turn_id, {
                "phase": "field", "tier": self.request.kind, "index": event.index,
                "label": event.label, "control_type": event.control_type,
            })
        elif event.kind == DecodeEventKind.OPTION_COMPLETED:
            assert event.option is not None
            accepted, warning = self.enforcer.offer(event.option)
            if accepted:
                session._emit(ev.OPTION_DELTA, self.turn_id, {
                    "phase": "completed", "tier": self.request.kind, "index": event.index,
                    "option": encode_option(event.option),
                })
            else:
                session._emit(ev.OPTION_DELTA, self.turn_id, {
                    "phase": "dropped", "tier": self.request.kind, "index": event.index,
                    "label": event.option.label, "warning": warning,
                })
        elif event.kind == DecodeEventKind.DOCUMENT_COMPLETED:
            outcome = self.enforcer.finish(raw_text="".join(self.raw_parts))
            self.finished = True
            self.stream.close()
            self.session._option_pump_done(self, outcome)
        elif event.kind == DecodeEventKind.DECODE_ERROR:
            self._decode_failed(event.detail or "decode error")

    def _decode_failed(self, detail: str) -> None:
        session = self.session
        retrying = self.attempt < self.MAX_ATTEMPTS
        session._emit(ev.ERROR, self.turn_id, {
            "name": "DecodeError" if retrying else "DecodeFailed", "detail": detail,
            "attempt": self.attempt, "retrying": retrying,
        })
        self.stream.close()
        if not retrying:
            self._finish_failed("DecodeFailed", detail, emit=False)
            return
        self.attempt += 1
        self._reset_decode()
        self.stream = session._open_completion(
            CompletionRequest(purpose="options", system_text=self.prompt_text)
        )

    def _finish_failed(self, name: str, detail: str, emit: bool = True) -> None:
        if emit:
            self.session._emit(ev.ERROR, self.turn_id, {"name": name, "detail": detail})
        self.finished = True
        self.stream.close()
        outcome = GenerationOutcome(accepted=OptionSet(), failed=True, raw_text="".join(self.raw_parts))
        self.session._option_pump_done(self, outcome)


class _ChatPump(_Pump):
    """Streams one chat completion and atomically publishes the final text."""

    def __init__(self, session: "Session", request: ChatRequest, sequence: int):
        self.request = request
        self.sequence = sequence
        self.parts: list[str] = []
        stream = session._open_completion(
            CompletionRequest(
                purpose="chat",
                system_text=request.prompt.system_text,
                messages=request.prompt.messages,
                sequence=sequence,
            )
        )
        super().__init__(session, stream, "chat")

    def _handle(self, kind: str, payload: Any, now: float) -> None:
        if kind == _TRANSPORT:
            self.finished = True
            self.session._chat_failed(self, payload)
            return
        if kind == CHUNK:
            self.parts.append(payload)
            self.session._emit(ev.CHAT_DELTA, self.request.turn_id, {"text": payload})
            return
        self.finished = True
        self.session._chat_finished(self, "".join(self.parts))


class Session:
    """State machine plus driver hooks for one conversation."""

    def __init__(
        self,
        session_id: str | None,
        mode: Mode | str,
        gateway: Gateway,
        clock: Clock | None = None,
        store: SessionDirectoryStore | None = None,
        sink: Callable[[StreamEvent], None] | None = None,
        state: SessionState | None = None,
    ):
        mode = Mode(mode)
        self._gateway = gateway
        self._clock = clock or RealClock()
        self._store = store
        self._sinks: list[Callable[[StreamEvent], None]] = [sink] if sink else []
        self.ring = EventRing()
        if state is not None:
            self.state = state
        else:
            options = load_static_preset() if mode is Mode.STATIC else OptionSet()
            self.state = SessionState(
                session_id=session_id or uuid.uuid4().hex[:12],
                mode=mode,
                session_options=options,
            )
        self._pumps: list[_Pump] = []
        self._inline_pump: _OptionPump | None = None
        self._session_pump: _OptionPump | None = None
        self._chat_pump: _ChatPump | None = None
        self._regen_due: float | None = None
        self._regen_cause: str | None = None
        self._sequence = 0

    # -- plumbing ---------------------------------------------------------

    @property
    def session_id(self) -> str:
        return self.state.session_id

    @property
    def revision(self) -> int:
        return self.state.revision

    def add_sink(self, sink: Callable[[StreamEvent], None]) -> None:
        self._sinks.append(sink)

    def _emit(self, kind: str, turn_id: int | None, payload: dict[str, Any]) -> int:
        self.state.revision += 1
        event = StreamEvent(
            kind=kind,
            session_id=self.state.session_id,
            revision=self.state.revision,
            turn_id=turn_id,
            payload=payload,
        )
        self.ring.append(event)
        for sink in self._sinks:
            sink(event)
        return event.revision

    def _open_completion(self, request: CompletionRequest) -> Any:
        self._sequence += 1
        request = CompletionRequest(
            purpose=request.purpose,
            system_text=request.system_text,
            messages=request.messages,
            model=request.model,
            temperature=request.temperature,
            max_tokens=request.max_tokens,
            stream=True,
            sequence=self._sequence,
        )
        if hasattr(self._gateway, "clock_now"):
            self._gateway.clock_now = self._clock.now()
        return self._gateway.stream_completion(request)

    def _turn(self, turn_id: int) -> ChatTurn:
        for turn in self.state.turns:
            if turn.turn_id == turn_id:
                return turn
        raise UnknownTurn(turn_id)

    def _history_pairs(self, exclude_latest: bool) -> list[tuple[str, str | None]]:
        turns = self.state.turns[:-1] if exclude_latest else self.state.turns
        return [(t.user_text, t.assistant_text) for t in turns]

    # -- mutations ----------------------------------------------------------

    def submit_prompt(self, text: str) -> int:
        if not text or not text.strip():
            raise EmptyPrompt("prompt must be nonempty")
        latest = self.state.latest_turn
        if latest is not None and latest.generating:
            raise Busy("a prompt is already being processed")
        self._clear_pending_regen()
        self._cancel_chat_pump()

        turn_id = len(self.state.turns) + 1
        if self.state.mode is Mode.STATIC:
            turn = ChatTurn(turn_id, text, OptionSet(), None, TurnStatus.GENERATING_RESPONSE)
            self.state.turns.append(turn)
            self._start_chat(CAUSE_INITIAL)
            return turn_id

        turn = ChatTurn(turn_id, text, OptionSet(), None, TurnStatus.GENERATING_OPTIONS)
        self.state.turns.append(turn)
        self._emit(ev.OPTION_DELTA, turn_id, {
            "phase": "generation_started", "tier": INLINE, "user_text": text,
        })
        request = GenerationRequest(
            kind=INLINE,
            history=tuple(self._history_pairs(exclude_latest=True)),
            latest_input=text,
            existing=self.state.session_options,
            request_id=f"{self.session_id}:{turn_id}:inline",
        )
        pump = _OptionPump(self, request, turn_id)
        self._inline_pump = pump
        self._pumps.append(pump)
        return turn_id

    def update_inline_option(self, turn_id: int, label: str, value: str | list[str]) -> int:
        turn = self._turn(turn_id)
        latest = self.state.latest_turn
        if latest is None or turn.turn_id != latest.turn_id:
            raise NotLatestTurn(f"turn {turn_id} is frozen; only the latest turn is editable")
        option = turn.inline_options.get(label)
        if option is None:
            raise UnknownLabel(label)
        updated = set_value(option, value)
        turn.inline_options = turn.inline_options.with_replaced(label, updated)
        revision = self._emit(ev.OPTION_DELTA, turn_id, {
            "phase": "value_changed", "label": option.label,
            "value": value if isinstance(value, str) else list(value),
        })
        self._schedule_regen(CAUSE_OPTION_CHANGED)
        return revision

    def pin_option(self, turn_id: int, label: str) -> int:
        turn = self._turn(turn_id)
        option = turn.inline_options.get(label)
        if option is None:
            raise UnknownLabel(label)
        if label in self.state.session_options:
            raise DuplicateSessionLabel(label)
        turn.inline_options = turn.inline_options.without(label)
        self.state.session_options = self.state.session_options.with_appended(
            option.with_origin(Origin.PINNED)
        )
        revision = self._emit(ev.SESSION_OPTIONS_CHANGED, turn_id, {
            "change": "pinned", "label": option.label,
            "options": [encode_option(o) for o in self.state.session_options],
        })
        self._schedule_regen(CAUSE_SESSION_OPTIONS_CHANGED)
        return revision

    def unpin_option(self, label: str) -> int:
        """Move a session option back to the latest turn (inverse of pin)."""
        option = self.state.session_options.get(label)
        if option is None:
            raise UnknownLabel(label)
        latest = self.state.latest_turn
        if latest is None:
            raise NoTurns("no turn to unpin into")
        if label in latest.inline_options:
            raise DuplicateSessionLabel(label)
        self.state.session_options = self.state.session_options.without(label)
        latest.inline_options = latest.inline_options.with_appended(
            option.with_origin(Origin.GENERATED_INLINE)
        )
        revision = self._emit(ev.SESSION_OPTIONS_CHANGED, latest.turn_id, {
            "change": "unpinned", "label": option.label,
            "options": [encode_option(o) for o in self.state.session_options],
        })
        self._schedule_regen(CAUSE_SESSION_OPTIONS_CHANGED)
        return revision

    def delete_option(self, tier: str, label: str) -> int:
        if self.state.mode is Mode.STATIC:
            raise StaticModeViolation("static sessions have a fixed control list")
        if tier == SESSION_TIER:
            if label not in self.state.session_options:
                raise UnknownLabel(label)
            kept = self.state.session_options.get(label)
            self.state.session_options = self.state.session_options.without(label)
            revision = self._emit(ev.SESSION_OPTIONS_CHANGED, None, {
                "change": "deleted", "label": kept.label,
                "options": [encode_option(o) for o in self.state.session_options],
            })
        elif tier == INLINE_TIER:
            latest = self.state.latest_turn
            if latest is None or label not in latest.inline_options:
                raise UnknownLabel(label)
            kept = latest.inline_options.get(label)
            latest.inline_options = latest.inline_options.without(label)
            revision = self._emit(ev.OPTION_DELTA, latest.turn_id, {
                "phase": "deleted", "label": kept.label,
            })
        else:
            raise UnknownLabel(f"{tier}/{label}")
        if self.state.turns:
            self._schedule_regen(
                CAUSE_SESSION_OPTIONS_CHANGED if tier == SESSION_TIER else CAUSE_OPTION_CHANGED
            )
        return revision

    def export_session_options(self) -> str:
        return encode_document(self.state.session_options)

    def import_session_options(self, text: str) -> int:
        imported = parse_option_document(text, origin=Origin.USER_JSON)
        if self.state.mode is Mode.STATIC:
            self._check_preset_conformance(imported)
            imported = OptionSet(o.with_origin(Origin.PRESET) for o in imported)
        self.state.session_options = imported
        revision = self._emit(ev.SESSION_OPTIONS_CHANGED, None, {
            "change": "imported",
            "options": [encode_option(o) for o in self.state.session_options],
        })
        if self.state.turns:
            self._schedule_regen(CAUSE_SESSION_OPTIONS_CHANGED)
        return revision

    def _check_preset_conformance(self, imported: OptionSet) -> None:
        preset = load_static_preset()
        if imported.labels() != preset.labels():
            raise StaticModeViolation("static sessions keep the preset control list")
        for incoming, fixed in zip(imported, preset):
            inc, ref = incoming.control, fixed.control
            if type(inc) is not type(ref) or getattr(inc, "choices", None) != getattr(ref, "choices", None):
                raise StaticModeViolation(f"control {fixed.label!r} must keep its preset choices")
            if getattr(inc, "appearance", None) != getattr(ref, "appearance", None):
                raise StaticModeViolation(f"control {fixed.label!r} must keep its appearance")
            if incoming.non_canonical:
                raise StaticModeViolation(f"control {fixed.label!r} only accepts its preset choices")

    def load_static_preset(self) -> int:
        if self.state.mode is not Mode.STATIC:
            raise StaticModeViolation("preset loading applies to static sessions")
        self.state.session_options = load_static_preset()
        return self._emit(ev.SESSION_OPTIONS_CHANGED, None, {
            "change": "preset_loaded",
            "options": [encode_option(o) for o in self.state.session_options],
        })

    def request_session_options(self, utterance: str) -> int:
        if self.state.mode is Mode.STATIC:
            raise StaticModeViolation("option generation is disabled in static mode")
        if not utterance or not utterance.strip():
            raise EmptyPrompt("utterance must be nonempty")
        if self._session_pump is not None and not self._session_pump.finished:
            cancelled = self._session_pump
            cancelled.close()
            self._detach(cancelled)
            self._session_pump = None
            self._emit(ev.ERROR, None, {
                "name": "Cancelled",
                "detail": "session option generation superseded by a newer request",
            })
        revision = self._emit(ev.OPTION_DELTA, None, {
            "phase": "generation_started", "tier": SESSION, "utterance": utterance,
        })
        request = GenerationRequest(
            kind=SESSION,
            history=tuple(self._history_pairs(exclude_latest=False)),
            latest_input=utterance,
            existing=self.state.session_options,
            request_id=f"{self.session_id}:session:{self._sequence + 1}",
        )
        pump = _OptionPump(self, request, None)
        self._session_pump = pump
        self._pumps.append(pump)
        return revision

    def regenerate_latest(self, cause: str = CAUSE_OPTION_CHANGED) -> int:
        if not self.state.turns:
            raise NoTurns("nothing to regenerate")
        self._clear_pending_regen()
        return self._start_chat(cause)

    def persist(self) -> None:
        if self._store is None:
            raise RuntimeError("session has no store configured")
        self._store.save(self.state)

    @classmethod
    def load(
        cls,
        session_id: str,
        store: SessionDirectoryStore,
        gateway: Gateway,
        clock: Clock | None = None,
        sink: Callable[[StreamEvent], None] | None = None,
    ) -> "Session":
        state = store.load(session_id)
        return cls(None, state.mode, gateway, clock=clock, store=store, sink=sink, state=state)

    # -- generation plumbing -------------------------------------------------

    def _detach(self, pump: _Pump) -> None:
        if pump in self._pumps:
            self._pumps.remove(pump)

    def _cancel_chat_pump(self) -> None:
        if self._chat_pump is not None:
            self._chat_pump.close()
            self._detach(self._chat_pump)
            self._chat_pump = None

    def _clear_pending_regen(self) -> None:
        self._regen_due = None
        self._regen_cause = None

    def _schedule_regen(self, cause: str) -> None:
        if not self.state.turns:
            return
        self._cancel_chat_pump()
        self._regen_due = self._clock.now() + DEBOUNCE_SECONDS
        self._regen_cause = cause

    def _fire_regen(self) -> None:
        cause = self._regen_cause or CAUSE_OPTION_CHANGED
        self._clear_pending_regen()
        if not self.state.turns:
            return
        if self._inline_pump is not None and not self._inline_pump.finished:
            # the initial flow is still decoding options; the upcoming initial
            # response will read current state anyway
            return
        self._start_chat(cause)

    def _start_chat(self, cause: str) -> int:
        turn = self.state.latest_turn
        assert turn is not None
        self._cancel_chat_pump()
        block = serialize_refinements(self.state.session_options, turn.inline_options)
        prompt = assemble_chat_prompt(self._history_pairs(exclude_latest=True), turn.user_text, block)
        payload: dict[str, Any] = {"cause": cause}
        if cause == CAUSE_INITIAL:
            # lets a client reconstruct the turn purely from the event log
            payload["user_text"] = turn.user_text
        revision = self._emit(ev.REGEN_STARTED, turn.turn_id, payload)
        request = ChatRequest(self.session_id, turn.turn_id, prompt, cause)
        pump = _ChatPump(self, request, self._sequence + 1)
        self._chat_pump = pump
        self._pumps.append(pump)
        return revision

    def _option_pump_done(self, pump: _OptionPump, outcome: GenerationOutcome) -> None:
        self._detach(pump)
        if pump.request.kind == INLINE:
            self._inline_pump = None
            turn = self._turn(pump.turn_id)
            turn.inline_options = OptionSet(outcome.accepted)
            turn.status = TurnStatus.GENERATING_RESPONSE
            self._emit(ev.OPTION_SET_COMPLETE, turn.turn_id, {
                "tier": INLINE,
                "options": [encode_option(o) for o in outcome.accepted],
                "warnings": outcome.warnings,
                "failed": outcome.failed,
            })
            self._start_chat(CAUSE_INITIAL)
            return
        # session tier
        self._session_pump = None
        merged, dropped = merge_dedupe(self.state.session_options, outcome.accepted)
        warnings = list(outcome.warnings)
        warnings.extend({"kind": "duplicate", "label": d.incoming_label} for d in dropped)
        self.state.session_options = merged
        self._emit(ev.OPTION_SET_COMPLETE, None, {
            "tier": SESSION,
            "options": [encode_option(o) for o in outcome.accepted],
            "warnings": warnings,
            "failed": outcome.failed,
        })
        self._emit(ev.SESSION_OPTIONS_CHANGED, None, {
            "change": "generated",
            "options": [encode_option(o) for o in self.state.session_options],
        })
        if self.state.turns and not outcome.failed:
            self._schedule_regen(CAUSE_SESSION_OPTIONS_CHANGED)

    def _chat_finished(self, pump: _ChatPump, final_text: str) -> None:
        self._detach(pump)
        if pump.cancelled or pump is not self._chat_pump:
            return  # superseded; a newer generation owns the turn
        self._chat_pump = None
        turn = self._turn(pump.request.turn_id)
        turn.assistant_text = final_text
        turn.status = TurnStatus.COMPLETE
        turn.error = None
        self._emit(ev.CHAT_COMPLETE, turn.turn_id, {"text": final_text, "cause": pump.request.cause})

    def _chat_failed(self, pump: _ChatPump, exc: TransportError) -> None:
        self._detach(pump)
        if pump.cancelled or pump is not self._chat_pump:
            return
        self._chat_pump = None
        turn = self._turn(pump.request.turn_id)
        turn.status = TurnStatus.ERRORED
        turn.error = str(exc)
        self._emit(ev.ERROR, turn.turn_id, {"name": "BackendError", "detail": str(exc)})

    # -- driving ------------------------------------------------------------

    def next_wake(self) -> float | None:
        now = self._clock.now()
        candidates: list[float] = []
        if self._regen_due is not None:
            candidates.append(max(self._regen_due, now))
        for pump in self._pumps:
            if pump.finished or pump.cancelled:
                continue
            if pump.wait_until is not None and pump.wait_until > now:
                candidates.append(pump.wait_until)
            else:
                candidates.append(now)
        return min(candidates) if candidates else None

    def fire_due_timer(self) -> bool:
        if self._regen_due is not None and self._clock.now() >= self._regen_due:
            self._fire_regen()
            return True
        return False

    def ready_pump(self) -> _Pump | None:
        now = self._clock.now()
        for pump in self._pumps:
            if pump.finished or pump.cancelled:
                continue
            if pump.wait_until is None or now >= pump.wait_until:
                return pump
        return None

    def run_ready(self) -> bool:
        """Run everything due at the current clock reading (virtual driving)."""
        progressed_any = False
        while True:
            if self.fire_due_timer():
                progressed_any = True
                continue
            pump = self.ready_pump()
            if pump is None:
                return progressed_any
            kind, payload = pump.fetch(self._clock.now())
            pump.apply(kind, payload, self._clock.now())
            if kind == WAIT:
                if pump.wait_until is not None and pump.wait_until > self._clock.now():
                    continue  # now parked in the future; other work may be ready
                return progressed_any
            progressed_any = True
