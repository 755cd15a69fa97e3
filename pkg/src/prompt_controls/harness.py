"""Headless scenario execution against the replay backend.

A scenario file is a versioned JSON document: a session id and mode, the
id of a backend fixture (resolved as ``<fixture>.fixture.json`` next to
the scenario unless a directory is given), and a list of client actions
with virtual timestamps. Running it produces a transcript: one line per
wire event, stamped with virtual time, plus the final session snapshot.
Transcripts are canonical text, so golden comparison is plain byte
equality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .clock import VirtualClock
from .errors import ActionRejected, EngineError, LeftoverFixtures
from .events import StreamEvent
from .gateway import Fixture, ReplayGateway, load_fixture
from .runtime import Session
from .session import Mode, snapshot_state

TRANSCRIPT_VERSION = 1
SCENARIO_VERSION = 1


@dataclass(frozen=True)
class ScenarioAction:
    at: float
    op: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    scenario_id: str
    mode: Mode
    fixture: Fixture
    actions: list[ScenarioAction]
    session_id: str
    settle: float = 60.0  # virtual seconds granted after the last action


def load_scenario(path: str | Path, fixtures_dir: str | Path | None = None) -> Scenario:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("version") != SCENARIO_VERSION:
        raise ValueError(f"unsupported scenario version {data.get('version')!r}")
    fixture_ref = data["fixture"]
    base = Path(fixtures_dir) if fixtures_dir else path.parent
    fixture = load_fixture(base / f"{fixture_ref}.fixture.json")
    actions = [
        ScenarioAction(at=float(a["at"]), op=a["op"], args={k: v for k, v in a.items() if k not in ("at", "op")})
        for a in data["actions"]
    ]
    return Scenario(
        scenario_id=data.get("scenario", path.stem),
        mode=Mode(data.get("mode", "dynamic")),
        fixture=fixture,
        actions=actions,
        session_id=data.get("session_id", data.get("scenario", path.stem)),
        settle=float(data.get("settle", 60.0)),
    )


@dataclass
class Transcript:
    scenario_id: str
    entries: list[tuple[float, StreamEvent]]
    final_state: dict[str, Any]
    # audit data for assertions; not part of the canonical text
    chat_system_texts: list[str] = field(default_factory=list)
    request_purposes: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [json.dumps({"transcript_version": TRANSCRIPT_VERSION, "scenario": self.scenario_id},
                            ensure_ascii=False, separators=(",", ":"))]
        for t, event in self.entries:
            lines.append(json.dumps({"t": round(t, 6), "event": event.to_wire()},
                                    ensure_ascii=False, separators=(",", ":")))
        lines.append(json.dumps({"final_state": self.final_state},
                                ensure_ascii=False, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _apply_action(session: Session, action: ScenarioAction) -> None:
    op = action.op
    args = action.args
    if op == "submit_prompt":
        session.submit_prompt(args["text"])
    elif op == "update_inline_option":
        session.update_inline_option(int(args["turn"]), args["label"], args["value"])
    elif op == "pin_option":
        session.pin_option(int(args["turn"]), args["label"])
    elif op == "unpin_option":
        session.unpin_option(args["label"])
    elif op == "delete_option":
        session.delete_option(args["tier"], args["label"])
    elif op == "import_session_options":
        text = args["text"] if "text" in args else json.dumps(args["options"])
        session.import_session_options(text)
    elif op == "request_session_options":
        session.request_session_options(args["utterance"])
    elif op == "regenerate_latest":
        session.regenerate_latest(args.get("cause", "option_changed"))
    elif op == "persist":
        session.persist()
    else:
        raise ValueError(f"unknown scenario op {op!r}")


def run_scenario(scenario: Scenario) -> Transcript:
    """Drive the full stack under a virtual clock; deterministic by construction."""
    clock = VirtualClock()
    gateway = ReplayGateway(scenario.fixture)
    entries: list[tuple[float, StreamEvent]] = []
    session = Session(
        session_id=scenario.session_id,
        mode=scenario.mode,
        gateway=gateway,
        clock=clock,
        sink=lambda event: entries.append((clock.now(), event)),
    )

    def drive_until(target: float) -> None:
        while True:
            session.run_ready()
            wake = session.next_wake()
            if wake is None or wake > target:
                break
            clock.set(max(wake, clock.now()))
        clock.set(max(target, clock.now()))

    for step, action in enumerate(sorted(scenario.actions, key=lambda a: a.at)):
        drive_until(action.at)
        try:
            _apply_action(session, action)
        except EngineError as exc:
            raise ActionRejected(step, exc) from exc
        session.run_ready()

    # drain: let debounce timers fire and streams finish
    deadline = clock.now() + scenario.settle
    while True:
        session.run_ready()
        wake = session.next_wake()
        if wake is None:
            break
        if wake > deadline:
            raise RuntimeError(f"scenario still busy past settle window (next wake {wake})")
        clock.set(max(wake, clock.now()))

    if gateway.remaining():
        raise LeftoverFixtures(scenario.scenario_id, gateway.remaining())
    return Transcript(
        scenario_id=scenario.scenario_id,
        entries=entries,
        final_state=snapshot_state(session.state),
        chat_system_texts=[r.system_text for r in gateway.log if r.purpose == "chat"],
        request_purposes=[r.purpose for r in gateway.log],
    )


def run_scenario_file(scenario_path: str | Path, fixtures_dir: str | Path | None = None) -> Transcript:
    return run_scenario(load_scenario(scenario_path, fixtures_dir))


def diff_golden(transcript: Transcript, golden_path: str | Path) -> str | None:
    """None when byte-identical; otherwise a short human-readable diff."""
    golden_path = Path(golden_path)
    if not golden_path.exists():
        return f"golden file {golden_path} does not exist"
    actual = transcript.to_text()
    expected = golden_path.read_text(encoding="utf-8")
    if actual == expected:
        return None
    actual_lines = actual.splitlines()
    expected_lines = expected.splitlines()
    for i, (a, b) in enumerate(zip(actual_lines, expected_lines)):
        if a != b:
            return f"first difference at line {i + 1}:\n  golden: {b}\n  actual: {a}"
    return (
        f"line counts differ: golden {len(expected_lines)} lines, actual {len(actual_lines)} lines"
    )
