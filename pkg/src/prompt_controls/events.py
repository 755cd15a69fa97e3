"""Wire-level events pushed from a session to subscribed clients.

Revisions and events are in bijection: every emitted event increments
the session revision by exactly one and carries the new value, so a
client that resumes from ``Last-Event-ID`` can detect gaps. Each session
keeps a bounded ring of recent events for resumption; anything older is
gone and the client must refetch a snapshot.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

OPTION_DELTA = "option_delta"
OPTION_SET_COMPLETE = "option_set_complete"
CHAT_DELTA = "chat_delta"
CHAT_COMPLETE = "chat_complete"
REGEN_STARTED = "regen_started"
SESSION_OPTIONS_CHANGED = "session_options_changed"
ERROR = "error"

EVENT_KINDS = frozenset(
    {
        OPTION_DELTA,
        OPTION_SET_COMPLETE,
        CHAT_DELTA,
        CHAT_COMPLETE,
        REGEN_STARTED,
        SESSION_OPTIONS_CHANGED,
        ERROR,
    }
)

RING_CAPACITY = 1000


@dataclass(frozen=True)
class StreamEvent:
    kind: str
    session_id: str
    revision: int
    turn_id: int | None = None
    payload: dict[str, Any] = field(default_factory=dict)

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {
            "kind": self.kind,
            "session_id": self.session_id,
            "revision": self.revision,
        }
        if self.turn_id is not None:
            wire["turn_id"] = self.turn_id
        wire["payload"] = self.payload
        return wire

    def to_sse(self) -> str:
        data = json.dumps(self.to_wire(), ensure_ascii=False, separators=(",", ":"))
        return f"id: {self.revision}\nevent: {self.kind}\ndata: {data}\n\n"


EventSink = Callable[[StreamEvent], None]


class EventRing:
    """Recent events, bounded; supports Last-Event-ID style resumes."""

    def __init__(self, capacity: int = RING_CAPACITY):
        self._events: deque[StreamEvent] = deque(maxlen=capacity)

    def append(self, event: StreamEvent) -> None:
        self._events.append(event)

    def since(self, revision: int) -> list[StreamEvent] | None:
        """Events after ``revision``; None if that point has been evicted."""
        events = list(self._events)
        if not events:
            return []
        newest = events[-1].revision
        if revision >= newest:
            return []
        oldest = events[0].revision
        if revision < oldest - 1:
            return None
        return [e for e in events if e.revision > revision]
