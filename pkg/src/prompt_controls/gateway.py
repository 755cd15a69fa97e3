"""Completion backends: live HTTP, recording, and deterministic replay.

Every stream exposes one pull-based method, ``next_event(now)``, so the
session driver can interleave chunk handling with timers and
cancellation. Replay streams pace themselves against the session clock
via per-chunk virtual delays; live streams just block on the socket.

Replay matching is by request order, not content: fixtures stay valid
when prompts change, and a drained or leftover fixture fails loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Protocol

from .errors import FixtureExhausted, TransportError

DEFAULT_MODEL = "gpt4-turbo"
DEFAULT_TEMPERATURE = 0.7

# next_event results
CHUNK = "chunk"
WAIT = "wait"
DONE = "done"


@dataclass(frozen=True)
class CompletionRequest:
    purpose: str  # "options" or "chat"; bookkeeping only
    system_text: str
    messages: tuple[tuple[str, str], ...] = ()
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int | None = None
    stream: bool = True
    sequence: int = 0


class CompletionStream(Protocol):
    def next_event(self, now: float) -> tuple[str, Any]:
        """(CHUNK, text) | (WAIT, resume_time) | (DONE, None); raises TransportError."""
        ...

    def close(self) -> None: ...


class Gateway(Protocol):
    def stream_completion(self, request: CompletionRequest) -> CompletionStream: ...


@dataclass(frozen=True)
class Fault:
    kind: str  # "disconnect" drops the stream; "garbage" injects a junk chunk and ends
    at_chunk: int  # 1-based position of the chunk the fault replaces
    payload: str = "\x00<<injected-fault>>"


@dataclass(frozen=True)
class ScriptedCompletion:
    chunks: tuple[str, ...]
    delays: tuple[float, ...] = ()  # virtual seconds before each chunk; missing = 0
    fault: Fault | None = None

    def delay_before(self, index: int) -> float:
        return self.delays[index] if index < len(self.delays) else 0.0


@dataclass
class Fixture:
    scenario_id: str
    completions: list[ScriptedCompletion] = field(default_factory=list)

    @staticmethod
    def from_dict(data: dict) -> "Fixture":
        completions = []
        for comp in data.get("completions", []):
            fault = None
            if comp.get("fault"):
                f = comp["fault"]
                fault = Fault(
                    kind=f["kind"],
                    at_chunk=int(f["at_chunk"]),
                    payload=f.get("payload", Fault.payload),
                )
            completions.append(
                ScriptedCompletion(
                    chunks=tuple(comp["chunks"]),
                    delays=tuple(comp.get("delays", ())),
                    fault=fault,
                )
            )
        return Fixture(scenario_id=data["scenario"], completions=completions)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"scenario": self.scenario_id, "completions": []}
        for comp in self.completions:
            entry: dict[str, Any] = {"chunks": list(comp.chunks)}
            if comp.delays:
                entry["delays"] = list(comp.delays)
            if comp.fault:
                entry["fault"] = {
                    "kind": comp.fault.kind,
                    "at_chunk": comp.fault.at_chunk,
                    "payload": comp.fault.payload,
                }
            out["completions"].append(entry)
        return out


def load_fixture(path: str | Path) -> Fixture:
    return Fixture.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_fixture(fixture: Fixture, path: str | Path) -> None:
    Path(path).write_text(json.dumps(fixture.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


class ReplayStream:
    """Chunks come verbatim from the script, paced by virtual delays."""

    def __init__(self, script: ScriptedCompletion, opened_at: float):
        self._script = script
        self._index = 0
        self._due = opened_at + script.delay_before(0)
        self._closed = False

    def next_event(self, now: float) -> tuple[str, Any]:
        if self._closed:
            return DONE, None
        script = self._script
        fault = script.fault
        position = self._index + 1  # 1-based
        if fault is not None and position == fault.at_chunk:
            if now < self._due:
                return WAIT, self._due
            self._closed = True
            if fault.kind == "disconnect":
                raise TransportError(None, "scripted disconnect")
            return CHUNK, fault.payload  # garbage: one junk chunk, then done
        if self._index >= len(script.chunks):
            self._closed = True
            return DONE, None
        if now < self._due:
            return WAIT, self._due
        chunk = script.chunks[self._index]
        self._index += 1
        self._due = now + script.delay_before(self._index)
        return CHUNK, chunk

    def close(self) -> None:
        self._closed = True


class ReplayGateway:
    """Serves scripted completions strictly in request order."""

    def __init__(self, fixture: Fixture):
        self._fixture = fixture
        self._served = 0
        self.log: list[CompletionRequest] = []
        self.clock_now = 0.0  # callers set this before opening a stream

    def stream_completion(self, request: CompletionRequest) -> ReplayStream:
        self.log.append(request)
        if self._served >= len(self._fixture.completions):
            raise FixtureExhausted(self._fixture.scenario_id, self._served + 1)
        script = self._fixture.completions[self._served]
        self._served += 1
        return ReplayStream(script, opened_at=self.clock_now)

    @property
    def served(self) -> int:
        return self._served

    def remaining(self) -> int:
        return len(self._fixture.completions) - self._served


@dataclass
class BackendConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key: str = ""
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int | None = None
    timeout: float = 120.0


class LiveStream:
    def __init__(self, lines: Iterator[bytes], response):
        self._lines = lines
        self._response = response
        self._done = False

    def next_event(self, now: float) -> tuple[str, Any]:
        if self._done:
            return DONE, None
        try:
            for raw in self._lines:
                if not raw:
                    continue
                if not raw.startswith(b"data: "):
                    continue
                payload = raw[6:]
                if payload == b"[DONE]":
                    break
                data = json.loads(payload)
                delta = data["choices"][0].get("delta", {})
                content = delta.get("content")
                if content:
                    return CHUNK, content
            self._done = True
            self._response.close()
            return DONE, None
        except TransportError:
            raise
        except Exception as exc:  # connection drop, malformed event payload
            self._done = True
            self._response.close()
            raise TransportError(None, str(exc)) from exc

    def close(self) -> None:
        self._done = True
        self._response.close()


class LiveGateway:
    """OpenAI-compatible chat-completions client with streamed deltas."""

    def __init__(self, config: BackendConfig):
        self._config = config
        self.log: list[CompletionRequest] = []

    def stream_completion(self, request: CompletionRequest) -> LiveStream:
        import requests

        self.log.append(request)
        config = self._config
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.extend({"role": role, "content": text} for role, text in request.messages)
        body: dict[str, Any] = {
            "model": request.model or config.model,
            "messages": messages,
            "temperature": request.temperature,
            "stream": True,
        }
        if request.max_tokens or config.max_tokens:
            body["max_tokens"] = request.max_tokens or config.max_tokens
        try:
            response = requests.post(
                f"{config.base_url.rstrip('/')}/chat/completions",
                headers={
                    "Authorization": f"Bearer {config.api_key}",
                    "Content-Type": "application/json",
                },
                json=body,
                stream=True,
                timeout=config.timeout,
            )
            if response.status_code != 200:
                detail = response.text[:500]
                response.close()
                raise TransportError(response.status_code, detail)
        except TransportError:
            raise
        except Exception as exc:
            raise TransportError(None, str(exc)) from exc
        return LiveStream(response.iter_lines(), response)


class RecordingStream:
    def __init__(self, inner: CompletionStream, sink: list[str]):
        self._inner = inner
        self._sink = sink

    def next_event(self, now: float) -> tuple[str, Any]:
        kind, payload = self._inner.next_event(now)
        if kind == CHUNK:
            self._sink.append(payload)
        return kind, payload

    def close(self) -> None:
        self._inner.close()


class RecordingGateway:
    """Wraps a live gateway and persists every completion as replay chunks.

    Only chunk text and request bookkeeping land in the fixture; auth
    material never does.
    """

    def __init__(self, inner: Gateway, scenario_id: str, out_path: str | Path):
        self._inner = inner
        self._fixture = Fixture(scenario_id=scenario_id)
        self._out_path = Path(out_path)
        self.log: list[CompletionRequest] = []

    def stream_completion(self, request: CompletionRequest) -> RecordingStream:
        self.log.append(request)
        chunks: list[str] = []
        self._fixture.completions.append(ScriptedCompletion(chunks=()))
        slot = len(self._fixture.completions) - 1
        inner = self._inner.stream_completion(request)

        fixture = self._fixture
        out_path = self._out_path

        class _FlushOnDone(RecordingStream):
            def next_event(self, now: float) -> tuple[str, Any]:
                kind, payload = super().next_event(now)
                if kind == DONE:
                    fixture.completions[slot] = ScriptedCompletion(chunks=tuple(chunks))
                    save_fixture(fixture, out_path)
                return kind, payload

        return _FlushOnDone(inner, chunks)
