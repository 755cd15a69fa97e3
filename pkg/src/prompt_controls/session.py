"""Two-tier session state and its on-disk form.

A session holds session-wide options plus an ordered list of turns,
each carrying the user message, that turn's inline options, and the
(replaceable) assistant response. Snapshots are canonical JSON and a
checksum guards every persisted record; a record saved mid-generation
loads back with those turns collapsed to an interrupted error state.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from importlib.resources import files
from pathlib import Path
from typing import Any

from .errors import CorruptRecord, NotFound
from .options import Origin, OptionSet, encode_option, validate_option


class Mode(str, Enum):
    DYNAMIC = "dynamic"
    STATIC = "static"


class TurnStatus(str, Enum):
    GENERATING_OPTIONS = "generating_options"
    GENERATING_RESPONSE = "generating_response"
    COMPLETE = "complete"
    ERRORED = "errored"


# phase order used by the no-reversal invariant; the two terminal states
# share a phase (a failed regeneration moves complete -> errored laterally)
STATUS_PHASE = {
    TurnStatus.GENERATING_OPTIONS: 0,
    TurnStatus.GENERATING_RESPONSE: 1,
    TurnStatus.COMPLETE: 2,
    TurnStatus.ERRORED: 2,
}


@dataclass
class ChatTurn:
    turn_id: int
    user_text: str
    inline_options: OptionSet
    assistant_text: str | None
    status: TurnStatus
    error: str | None = None

    @property
    def generating(self) -> bool:
        return STATUS_PHASE[self.status] < 2


@dataclass
class SessionState:
    session_id: str
    mode: Mode
    session_options: OptionSet = field(default_factory=OptionSet)
    turns: list[ChatTurn] = field(default_factory=list)
    revision: int = 0

    @property
    def latest_turn(self) -> ChatTurn | None:
        return self.turns[-1] if self.turns else None


def load_static_preset() -> OptionSet:
    """The fixed control list used by static-mode sessions."""
    raw = json.loads(files("prompt_controls.templates").joinpath("static_preset.json").read_text("utf-8"))
    return OptionSet(validate_option(rec, origin=Origin.PRESET) for rec in raw)


# --- snapshots ---------------------------------------------------------------

def _turn_to_dict(turn: ChatTurn) -> dict[str, Any]:
    return {
        "turn_id": turn.turn_id,
        "user_text": turn.user_text,
        "inline_options": [encode_option(o) for o in turn.inline_options],
        "assistant_text": turn.assistant_text,
        "status": turn.status.value,
        "error": turn.error,
    }


def snapshot_state(state: SessionState) -> dict[str, Any]:
    return {
        "session_id": state.session_id,
        "mode": state.mode.value,
        "session_options": [encode_option(o) for o in state.session_options],
        "turns": [_turn_to_dict(t) for t in state.turns],
        "revision": state.revision,
    }


def snapshot_text(state: SessionState) -> str:
    return json.dumps(snapshot_state(state), indent=2, ensure_ascii=False)


def state_from_snapshot(data: dict[str, Any]) -> SessionState:
    """Rebuild state; in-flight turns collapse to an interrupted error."""
    turns: list[ChatTurn] = []
    for rec in data["turns"]:
        status = TurnStatus(rec["status"])
        error = rec.get("error")
        if STATUS_PHASE[status] < 2:
            status = TurnStatus.ERRORED
            error = "interrupted"
        turns.append(
            ChatTurn(
                turn_id=rec["turn_id"],
                user_text=rec["user_text"],
                inline_options=OptionSet(validate_option(o) for o in rec["inline_options"]),
                assistant_text=rec.get("assistant_text"),
                status=status,
                error=error,
            )
        )
    mode = Mode(data["mode"])
    origin = Origin.PRESET if mode is Mode.STATIC else Origin.USER_JSON
    return SessionState(
        session_id=data["session_id"],
        mode=mode,
        session_options=OptionSet(validate_option(o, origin=origin) for o in data["session_options"]),
        turns=turns,
        revision=data["revision"],
    )


# --- directory store ---------------------------------------------------------

class SessionDirectoryStore:
    """One checksummed JSON record per session, written temp-then-rename."""

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in session_id)
        return self._dir / f"{safe}.session.json"

    def save(self, state: SessionState) -> Path:
        body = snapshot_state(state)
        canonical = json.dumps(body, indent=2, ensure_ascii=False)
        checksum = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
        record = json.dumps({"checksum": checksum, "state": body}, indent=2, ensure_ascii=False)
        path = self._path(state.session_id)
        fd, tmp = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(record)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return path

    def load(self, session_id: str) -> SessionState:
        path = self._path(session_id)
        if not path.exists():
            raise NotFound(session_id)
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            body = record["state"]
            stored = record["checksum"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorruptRecord(f"unreadable session record {path.name}: {exc}") from exc
        canonical = json.dumps(body, indent=2, ensure_ascii=False)
        actual = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
        if actual != stored:
            raise CorruptRecord(f"checksum mismatch for session {session_id!r}")
        return state_from_snapshot(body)

    def list_ids(self) -> list[str]:
        return sorted(p.name[: -len(".session.json")] for p in self._dir.glob("*.session.json"))
