"""Wearable tactile display model: 16 pneumatic actuators in a 4x4 grid.

Contact drives all pockets together (pump on -> inflate toward 1, pump
off -> vent toward 0) through exact first-order dynamics with separate
inflate/deflate time constants. Per-actuator state is kept so patterned
rendering stays a configuration change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ACTUATOR_COUNT = 16
TAU_INFLATE_MS = 80.0    # placeholder pneumatic scale; configurable per session
TAU_DEFLATE_MS = 120.0


@dataclass(frozen=True)
class TactileFrame:
    actuators: tuple[float, ...]     # 16 levels in [0, 1], row-major 4x4
    commanded: bool                  # pump state, mirrors the contact boolean
    timestamp_ms: int

    def __post_init__(self):
        if len(self.actuators) != ACTUATOR_COUNT:
            raise ValueError(f"expected {ACTUATOR_COUNT} actuators, got {len(self.actuators)}")

    def to_payload(self) -> dict:
        return {
            "schema": "tims/wtd/1",
            "actuators": list(self.actuators),
            "commanded": self.commanded,
        }

    @classmethod
    def idle(cls, timestamp_ms: int = 0) -> "TactileFrame":
        return cls(actuators=(0.0,) * ACTUATOR_COUNT, commanded=False, timestamp_ms=timestamp_ms)


def update_tactile(
    prev: TactileFrame,
    touching: bool,
    dt_ms: float,
    tau_inflate_ms: float = TAU_INFLATE_MS,
    tau_deflate_ms: float = TAU_DEFLATE_MS,
) -> TactileFrame:
    """Advance every pocket one step toward its commanded level.

    Exact discretization of dl/dt = (target - l) / tau, so levels stay in
    [0, 1] for any dt and any input sequence.
    """
    if dt_ms <= 0:
        raise ValueError(f"dt_ms must be > 0, got {dt_ms}")
    target = 1.0 if touching else 0.0
    tau = tau_inflate_ms if touching else tau_deflate_ms
    decay = math.exp(-dt_ms / tau)
    levels = tuple(target + (level - target) * decay for level in prev.actuators)
    return TactileFrame(
        actuators=levels,
        commanded=touching,
        timestamp_ms=prev.timestamp_ms + int(dt_ms),
    )
