"""Session clocks.

The session loop is written against a tiny clock interface so the same code
runs in real time (device or audition runs) and on a virtual clock (tests,
evaluation, anything that must be reproducible). The virtual clock never
consults the wall clock for timestamps; speed only throttles how fast it is
allowed to advance, so a sped-up run emits bit-identical times.
"""
from __future__ import annotations

import time


class VirtualClock:
    """Discrete-event clock: time moves only when the session advances it.

    speed > 0 sleeps (delta / speed) wall seconds per advance so a human can
    listen along; speed 0 or None advances instantly.
    """

    def __init__(self, speed: float = 0.0) -> None:
        if speed < 0.0:
            raise ValueError("clock speed must be >= 0")
        self.speed = speed
        self._now = 0.0

    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> float:
        if t > self._now:
            if self.speed > 0.0:
                time.sleep((t - self._now) / self.speed)
            self._now = t
        return self._now

    @property
    def is_virtual(self) -> bool:
        return True


class RealtimeClock:
    """Monotonic wall clock, zeroed at construction."""

    def __init__(self) -> None:
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def advance_to(self, t: float) -> float:
        remaining = t - self.now()
        if remaining > 0.0:
            time.sleep(remaining)
        return self.now()

    @property
    def is_virtual(self) -> bool:
        return False
