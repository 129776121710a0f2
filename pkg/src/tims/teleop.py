"""Leader-follower position mapping and the follower state machine.

The follower increment is alpha * (new_leader - prev_leader) with the
leader frame in millimeters and the follower frame in micrometers, so a
factor of 1000 is folded into every step. The foot pedal acts as a
clutch: while disengaged the leader moves freely and the follower stays
bitwise frozen. The stylus button latches an insertion trigger on its
rising edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import Vec3

MM_TO_UM = 1000.0


class MappingConfigError(ValueError):
    """Mapping configuration violates its invariants."""


@dataclass(frozen=True)
class MappingConfig:
    alpha: float = 0.1
    workspace_min: Vec3 = Vec3(-20000.0, -20000.0, -20000.0)
    workspace_max: Vec3 = Vec3(20000.0, 20000.0, 20000.0)

    def validate(self) -> "MappingConfig":
        if not self.alpha > 0:
            raise MappingConfigError(f"alpha must be > 0, got {self.alpha}")
        lo, hi = self.workspace_min, self.workspace_max
        lo.require_finite("workspace_min")
        hi.require_finite("workspace_max")
        if not (lo.x < hi.x and lo.y < hi.y and lo.z < hi.z):
            raise MappingConfigError(f"workspace_min must be < workspace_max, got {lo} .. {hi}")
        return self


@dataclass(frozen=True)
class LeaderSample:
    """One forward-loop message: leader pose plus button and pedal state."""

    position: Vec3  # leader frame, mm
    stylus_pressed: bool
    pedal_engaged: bool
    timestamp_ms: int
    seq: int

    def to_payload(self) -> dict:
        return {
            "schema": "tims/leader/1",
            "position_mm": self.position.to_list(),
            "stylus_pressed": self.stylus_pressed,
            "pedal_engaged": self.pedal_engaged,
        }

    @classmethod
    def from_payload(cls, payload: dict, timestamp_ms: int, seq: int) -> "LeaderSample":
        p = payload["position_mm"]
        return cls(
            position=Vec3(p[0], p[1], p[2]),
            stylus_pressed=bool(payload["stylus_pressed"]),
            pedal_engaged=bool(payload["pedal_engaged"]),
            timestamp_ms=timestamp_ms,
            seq=seq,
        )


@dataclass(frozen=True)
class FollowerState:
    """Immutable snapshot of the simulated micromanipulator."""

    position: Vec3  # follower/world frame, um
    engaged: bool = False
    insertion_latched: bool = False

    def to_payload(self) -> dict:
        return {
            "schema": "tims/follower/1",
            "position_um": self.position.to_list(),
            "engaged": self.engaged,
            "insertion_latched": self.insertion_latched,
        }


def map_step(
    prev_leader: Vec3,
    new_leader: Vec3,
    prev_follower: Vec3,
    cfg: MappingConfig,
) -> tuple[Vec3, bool]:
    """One mapped position step; returns (new follower position, clamped flag)."""
    prev_leader.require_finite("prev_leader")
    new_leader.require_finite("new_leader")
    prev_follower.require_finite("prev_follower")
    cfg.validate()
    delta = (new_leader - prev_leader) * (cfg.alpha * MM_TO_UM)
    return (prev_follower + delta).clamped(cfg.workspace_min, cfg.workspace_max)


@dataclass
class ApplyResult:
    state: FollowerState
    clamped: bool = False
    dropped: bool = False      # sample rejected (sequence gap)
    gap: int = 0               # missing sample count when dropped
    insertion_edge: bool = False


def apply_sample(
    state: FollowerState,
    sample: LeaderSample,
    prev_sample: LeaderSample,
    cfg: MappingConfig,
) -> ApplyResult:
    """Advance the follower by one leader sample.

    Out-of-order samples are dropped (gap reported, state untouched):
    reordering would add latency the forward loop cannot afford.
    """
    if sample.seq != prev_sample.seq + 1:
        return ApplyResult(state=state, dropped=True, gap=sample.seq - prev_sample.seq - 1)

    insertion_edge = sample.stylus_pressed and not prev_sample.stylus_pressed
    latched = state.insertion_latched or insertion_edge

    if not sample.pedal_engaged:
        # Clutch open: leader repositions freely, follower frozen.
        new_state = replace(state, engaged=False, insertion_latched=latched)
        return ApplyResult(state=new_state, insertion_edge=insertion_edge)

    position, clamped = map_step(prev_sample.position, sample.position, state.position, cfg)
    new_state = FollowerState(position=position, engaged=True, insertion_latched=latched)
    return ApplyResult(state=new_state, clamped=clamped, insertion_edge=insertion_edge)


@dataclass
class FollowerMachine:
    """Single-writer wrapper that feeds LeaderSamples through apply_sample.

    Exactly one thread of control may call feed(); snapshots handed out
    are immutable and safe to share.
    """

    cfg: MappingConfig
    state: FollowerState = field(default_factory=lambda: FollowerState(position=Vec3.zero()))
    last_sample: LeaderSample | None = None
    clamp_events: int = 0
    gap_events: int = 0

    def feed(self, sample: LeaderSample) -> ApplyResult:
        if self.last_sample is None:
            # First sample only establishes the reference pose.
            self.last_sample = sample
            self.state = replace(self.state, engaged=sample.pedal_engaged)
            return ApplyResult(state=self.state)
        result = apply_sample(self.state, sample, self.last_sample, self.cfg)
        if result.dropped:
            self.gap_events += 1
            return result
        if result.clamped:
            self.clamp_events += 1
        self.state = result.state
        self.last_sample = sample
        return result

    def consume_insertion_latch(self) -> bool:
        """Return and clear the insertion latch (one attempt per stylus edge)."""
        latched = self.state.insertion_latched
        if latched:
            self.state = replace(self.state, insertion_latched=False)
        return latched
