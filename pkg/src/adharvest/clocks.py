"""Real and manual time sources.

Everything that depends on the current date or on elapsed time takes a
clock, so tests can pin "today" and make timing exact.
"""

from __future__ import annotations

import threading
import time
from datetime import date, datetime, timezone

__all__ = ["Clock", "ManualClock", "SystemClock"]


class Clock:
    def now(self) -> datetime:
        raise NotImplementedError

    def today(self) -> date:
        return self.now().date()

    def now_ms(self) -> float:
        raise NotImplementedError

    def wait_until_ms(self, deadline_ms: float, stop: threading.Event | None = None) -> bool:
        """Block until the deadline (or the stop event). True if stopped."""
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def wait_until_ms(self, deadline_ms: float, stop: threading.Event | None = None) -> bool:
        remaining = (deadline_ms - self.now_ms()) / 1000.0
        if remaining <= 0:
            return bool(stop and stop.is_set())
        if stop is None:
            time.sleep(remaining)
            return False
        return stop.wait(remaining)


class ManualClock(Clock):
    """Virtual clock: time moves only when something waits on it."""

    def __init__(self, start: datetime | None = None):
        self._base = start or datetime(2006, 3, 7, 12, 0, 0, tzinfo=timezone.utc)
        self._elapsed_ms = 0.0
        self._lock = threading.Lock()

    def now(self) -> datetime:
        from datetime import timedelta

        with self._lock:
            return self._base + timedelta(milliseconds=self._elapsed_ms)

    def now_ms(self) -> float:
        with self._lock:
            return self._elapsed_ms

    def advance_ms(self, ms: float) -> None:
        with self._lock:
            self._elapsed_ms += ms

    def advance_to_ms(self, deadline_ms: float) -> None:
        with self._lock:
            self._elapsed_ms = max(self._elapsed_ms, deadline_ms)

    def wait_until_ms(self, deadline_ms: float, stop: threading.Event | None = None) -> bool:
        if stop is not None and stop.is_set():
            return True
        self.advance_to_ms(deadline_ms)
        return False
