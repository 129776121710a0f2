"""Monotonic clock sources.

Scripted trials run on a simulated clock so that logs, timestamps, and
metrics are bit-reproducible; live sessions use the wall clock.
"""

from __future__ import annotations

import time


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic_ns()

    def now_ms(self) -> int:
        return (time.monotonic_ns() - self._t0) // 1_000_000


class SimClock:
    """Advanced explicitly by the control loop; never moves on its own."""

    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def advance(self, dt_ms: int) -> int:
        if dt_ms <= 0:
            raise ValueError(f"dt_ms must be > 0, got {dt_ms}")
        self._now += int(dt_ms)
        return self._now
