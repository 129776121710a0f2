from __future__ import annotations

import math

import numpy as np
import pytest

from tims.tactile import (
    ACTUATOR_COUNT,
    TAU_DEFLATE_MS,
    TAU_INFLATE_MS,
    TactileFrame,
    update_tactile,
)


def _oracle_level(level, touching, dt_ms):
    """Closed-form solution of dl/dt = (target - l)/tau over one step."""
    target = 1.0 if touching else 0.0
    tau = TAU_INFLATE_MS if touching else TAU_DEFLATE_MS
    return target + (level - target) * math.exp(-dt_ms / tau)


def test_idle_frame_is_fully_deflated():
    frame = TactileFrame.idle()
    assert frame.actuators == (0.0,) * ACTUATOR_COUNT
    assert frame.commanded is False


def test_inflation_approaches_one_exponentially():
    frame = TactileFrame.idle()
    frame = update_tactile(frame, touching=True, dt_ms=TAU_INFLATE_MS)
    assert frame.actuators[0] == pytest.approx(1.0 - math.exp(-1.0))
    assert frame.commanded is True
    for _ in range(100):
        frame = update_tactile(frame, touching=True, dt_ms=50.0)
    assert frame.actuators[0] == pytest.approx(1.0, abs=1e-9)


def test_deflation_is_slower_than_inflation():
    up = update_tactile(TactileFrame.idle(), True, dt_ms=40.0)
    full = TactileFrame(actuators=(1.0,) * ACTUATOR_COUNT, commanded=True, timestamp_ms=0)
    down = update_tactile(full, False, dt_ms=40.0)
    rise = up.actuators[0] - 0.0
    fall = 1.0 - down.actuators[0]
    assert rise > fall                          # tau_deflate > tau_inflate


def test_matches_closed_form_over_random_sequences():
    rng = np.random.default_rng(88)
    for _ in range(50):
        frame = TactileFrame.idle()
        oracle = [0.0] * ACTUATOR_COUNT
        for _ in range(40):
            touching = bool(rng.integers(0, 2))
            dt = float(rng.uniform(1.0, 120.0))
            frame = update_tactile(frame, touching, dt)
            oracle = [_oracle_level(lv, touching, dt) for lv in oracle]
            for got, want in zip(frame.actuators, oracle):
                assert got == pytest.approx(want, abs=1e-12)


def test_levels_stay_in_unit_interval():
    rng = np.random.default_rng(13)
    frame = TactileFrame.idle()
    for _ in range(500):
        frame = update_tactile(frame, bool(rng.integers(0, 2)),
                               float(rng.uniform(0.1, 500.0)))
        assert all(0.0 <= lv <= 1.0 for lv in frame.actuators)


def test_timestamp_accumulates():
    frame = TactileFrame.idle(timestamp_ms=100)
    frame = update_tactile(frame, True, dt_ms=50.0)
    assert frame.timestamp_ms == 150


def test_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        update_tactile(TactileFrame.idle(), True, dt_ms=0.0)
    with pytest.raises(ValueError):
        update_tactile(TactileFrame.idle(), True, dt_ms=-5.0)


def test_frame_length_enforced():
    with pytest.raises(ValueError):
        TactileFrame(actuators=(0.0,) * 15, commanded=False, timestamp_ms=0)


def test_payload_schema():
    payload = TactileFrame.idle().to_payload()
    assert payload["schema"] == "tims/wtd/1"
    assert payload["actuators"] == [0.0] * 16
    assert payload["commanded"] is False
