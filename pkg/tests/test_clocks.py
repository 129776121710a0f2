import time

import pytest

from tims.clocks import SimClock, WallClock


def test_sim_clock_moves_only_when_advanced():
    clock = SimClock(start_ms=500)
    assert clock.now_ms() == 500
    assert clock.now_ms() == 500
    assert clock.advance(50) == 550
    assert clock.now_ms() == 550


def test_sim_clock_rejects_non_positive_steps():
    clock = SimClock()
    with pytest.raises(ValueError):
        clock.advance(0)
    with pytest.raises(ValueError):
        clock.advance(-10)


def test_wall_clock_is_monotonic_from_zero():
    clock = WallClock()
    a = clock.now_ms()
    time.sleep(0.02)
    b = clock.now_ms()
    assert 0 <= a <= b
    assert b >= a + 10
