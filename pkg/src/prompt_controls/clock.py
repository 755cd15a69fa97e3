"""Time source abstraction so replayed sessions are wall-clock free.

Debounce timers and fixture chunk pacing read the session's clock. Live
serving uses the monotonic clock; replays use a manually advanced
virtual clock so identical scenarios produce identical transcripts.
"""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> float: ...


class RealClock:
    def now(self) -> float:
        return time.monotonic()


class VirtualClock:
    """Manually advanced clock; never moves backwards."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("cannot advance by a negative duration")
        self._now += dt
        return self._now

    def set(self, t: float) -> float:
        if t < self._now:
            raise ValueError(f"cannot move virtual clock backwards ({t} < {self._now})")
        self._now = t
        return self._now
