"""Scripted operator models.

Human stand-ins for benchmark and curriculum runs. The core model is a
perception-limited tracker: under a microscope the depth axis is hard to
judge, so the operator carries a slowly wandering perception bias with a
systematic inward (toward tissue) component, plus white motor jitter.
Feedback channels act on that model the way they act on people:

- tactile contact (when the display is on) triggers a retreat reflex and
  recalibrates the inward part of the bias;
- guidance force (when haptics are on) is followed compliantly and
  recalibrates the bias component along the felt direction.

An expert generator produces the clean hover-height demonstrations used
to fit guide paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Vec3
from .phantom import Phantom


@dataclass(frozen=True)
class OperatorParams:
    """Tunables for the scripted operator. Distances μm, times s."""

    # perception bias: Ornstein-Uhlenbeck with an inward mean
    bias_inward_um: float = 1800.0
    bias_sigma_um: float = 900.0
    bias_tau_s: float = 2.0
    jitter_um: float = 80.0

    # motion
    track_gain: float = 0.35
    v_max_um_s: float = 1200.0
    descend_v_um_s: float = 800.0
    pace_idx_s: float = 3.2          # guide indices per second at zero deviation
    pace_dev_um: float = 1200.0      # deviation scale that slows the pace
    pace_floor: float = 0.45

    # feedback responses
    compliance_um_per_ns: float = 8000.0   # displacement per (N * s) of felt force
    recalib_force_per_n: float = 6.0       # bias shrink rate along felt force
    touch_level: float = 0.3               # tactile level that reads as contact
    retreat_v_um_s: float = 1600.0
    recalib_touch_per_s: float = 6.0       # inward-bias shrink rate while touching

    # insertion
    aim_noise_um: float = 150.0
    depth_noise_um: float = 250.0
    palpation_residual: float = 0.75   # lateral error left after feeling the clot
    tube_residual: float = 0.4         # aim error left when parked in the guidance tube
    settle_ticks: int = 5

    def scaled(self, s: float) -> "OperatorParams":
        """Skill improvement: shrink all perception error sources by s."""
        return replace(
            self,
            bias_inward_um=self.bias_inward_um * s,
            bias_sigma_um=self.bias_sigma_um * s,
            jitter_um=self.jitter_um * s,
            aim_noise_um=self.aim_noise_um * s,
            depth_noise_um=self.depth_noise_um * s,
        )


class ScriptedOperator:
    """Perception state shared across one trial's phases."""

    def __init__(self, params: OperatorParams, phantom: Phantom, rng: np.random.Generator):
        self.params = params
        self.phantom = phantom
        self.rng = rng
        # start at a stationary draw around the inward mean; the direction
        # is resolved against the current tool position each step
        self.bias = np.array([
            rng.normal(0.0, params.bias_sigma_um),
            rng.normal(0.0, params.bias_sigma_um),
            rng.normal(0.0, params.bias_sigma_um),
        ])
        self._has_mean = False

    def _inward_unit(self, pos: Vec3) -> np.ndarray:
        v = self.phantom.center.to_array() - pos.to_array()
        n = float(np.linalg.norm(v))
        if n == 0.0:
            return np.array([0.0, 0.0, -1.0])
        return v / n

    def outward_unit(self, pos: Vec3) -> Vec3:
        return Vec3.from_array(-self._inward_unit(pos))

    def bias_step(self, pos: Vec3, dt_s: float) -> None:
        """Exact OU update toward the inward mean at the current pose."""
        p = self.params
        mean = self._inward_unit(pos) * p.bias_inward_um
        if not self._has_mean:
            self.bias = self.bias + mean
            self._has_mean = True
        decay = math.exp(-dt_s / p.bias_tau_s)
        spread = p.bias_sigma_um * math.sqrt(max(0.0, 1.0 - decay * decay))
        noise = self.rng.normal(0.0, 1.0, 3)
        self.bias = mean + (self.bias - mean) * decay + spread * noise

    def jitter(self) -> np.ndarray:
        return self.rng.normal(0.0, self.params.jitter_um, 3)

    def perceived(self, true_point: Vec3) -> Vec3:
        return Vec3.from_array(true_point.to_array() + self.bias + self.jitter())

    def recalibrate_touch(self, pos: Vec3, dt_s: float) -> None:
        """Contact tells the operator they are deeper than they thought:
        shrink the inward component of the bias."""
        u_in = self._inward_unit(pos)
        along = float(np.dot(self.bias, u_in))
        if along > 0:
            shrink = min(1.0, self.params.recalib_touch_per_s * dt_s)
            self.bias = self.bias - u_in * (along * shrink)

    def recalibrate_force(self, force: Vec3, dt_s: float) -> None:
        """Felt guidance force reveals the error component along it."""
        magnitude = force.norm()
        if magnitude == 0.0:
            return
        f_hat = force.to_array() / magnitude
        # force points from tool toward the path: bias component opposite
        # the force is the error being corrected
        along = float(np.dot(self.bias, -f_hat))
        if along > 0:
            shrink = min(1.0, self.params.recalib_force_per_n * magnitude * dt_s)
            self.bias = self.bias - (-f_hat) * (along * shrink)

    def track_velocity(self, pos: Vec3, perceived_target: Vec3, dt_s: float) -> np.ndarray:
        """Proportional pursuit of the perceived target, speed-capped."""
        p = self.params
        v = (perceived_target.to_array() - pos.to_array()) * p.track_gain
        cap = p.v_max_um_s * dt_s
        n = float(np.linalg.norm(v))
        if n > cap:
            v = v * (cap / n)
        return v

    def pace_factor(self, deviation_um: float) -> float:
        """Operators slow down when far off the path."""
        p = self.params
        return max(p.pace_floor, 1.0 / (1.0 + deviation_um / p.pace_dev_um))

    def depth_misjudge(self) -> float:
        """Blind depth estimate error for one insertion descent (μm).

        Positive values mean the operator would descend past the surface.
        Sampled once per descent; the inward bias enters via the aim point,
        this is the additional depth-stop error.
        """
        return abs(self.rng.normal(0.0, self.params.depth_noise_um))

    def aim_noise(self) -> np.ndarray:
        return self.rng.normal(0.0, self.params.aim_noise_um, 3)


def hover_curve(phantom: Phantom, standoff_um: float) -> np.ndarray:
    """The vessel curve lifted radially off the surface by standoff_um.

    Demonstrations (and hence guide paths) hover here: guidance corrections
    then pull the tool toward a line safely above the tissue, so guided
    deviations inside the dead zone cannot reach the penetration limit.
    """
    center = phantom.center.to_array()
    radial = phantom.vessel - center[None, :]
    norms = np.linalg.norm(radial, axis=1, keepdims=True)
    scale = (norms + standoff_um) / norms
    return center[None, :] + radial * scale


def expert_demonstrations(
    phantom: Phantom,
    standoff_um: float = 200.0,
    n_demos: int = 3,
    seed: int = 7,
    wobble_um: float = 25.0,
) -> list[np.ndarray]:
    """Clean hover-height traces with small smooth per-demo variation.

    The wobble is low-frequency (two sinusoids per axis with random phase)
    plus a little white noise, mimicking steady expert hands.
    """
    rng = np.random.default_rng(seed)
    base = hover_curve(phantom, standoff_um)
    n = len(base)
    s = np.linspace(0.0, 1.0, n)
    demos = []
    for _ in range(n_demos):
        offset = np.zeros((n, 3))
        for axis in range(3):
            for freq in (1.0, 2.0):
                amp = rng.normal(0.0, wobble_um / 2.0)
                phase = rng.uniform(0.0, 2.0 * math.pi)
                offset[:, axis] += amp * np.sin(2.0 * math.pi * freq * s + phase)
        offset += rng.normal(0.0, wobble_um / 5.0, (n, 3))
        demos.append(base + offset)
    return demos


WAYPOINT_KINDS = ("tracker", "deviant", "learner")


@dataclass(frozen=True)
class WaypointTrackerParams:
    """Tunables for the minimal waypoint-hopping operator."""

    noise_sigma_um: float = 0.0
    noise_tau_s: float = 1.0              # drift correlation time
    responsiveness_um_per_n: float = 0.0  # compliance per newton, per tick
    speed_um_s: float = 40000.0           # generous: any waypoint reached in one tick
    excursion_um: float = 0.0             # deviant: lateral square-wave amplitude
    excursion_period: int = 20            # deviant: ticks per half-cycle
    sigma_decay: float = 0.85             # learner: per-trial noise shrink

    def validate(self) -> "WaypointTrackerParams":
        if self.noise_sigma_um < 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.noise_sigma_um}")
        if self.responsiveness_um_per_n < 0:
            raise ValueError(
                f"responsiveness must be >= 0, got {self.responsiveness_um_per_n}")
        if not 0 < self.sigma_decay <= 1:
            raise ValueError(f"sigma decay must be in (0, 1], got {self.sigma_decay}")
        return self


class WaypointTracker:
    """Bare-bones hand model: hop toward the waypoint, drift, comply.

    Unlike the perception-bias operator above, this one has a single noise
    knob and an explicit per-tick force compliance, which makes closed-loop
    force effects easy to reason about in isolation. Kinds:

    - tracker: hop toward each waypoint with correlated Gaussian drift;
    - deviant: tracker plus a deliberate lateral square-wave excursion
      (exercises threshold and reminder logic deterministically);
    - learner: tracker whose drift sigma shrinks by a fixed factor after
      each completed trial.

    The per-step motion is: nominal step toward the waypoint (speed-capped,
    landing exactly when in reach) + Gaussian drift + responsiveness * felt
    force. With zero sigma and zero responsiveness the tracking is exact.
    """

    def __init__(
        self,
        kind: str = "tracker",
        params: WaypointTrackerParams = WaypointTrackerParams(),
        seed: int = 0,
    ):
        if kind not in WAYPOINT_KINDS:
            raise ValueError(f"unknown kind {kind!r}, expected one of {WAYPOINT_KINDS}")
        params.validate()
        self.kind = kind
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.sigma = params.noise_sigma_um
        self.drift = np.zeros(3)
        u = self.rng.normal(0.0, 1.0, 3)
        n = float(np.linalg.norm(u))
        self._lateral = u / n if n > 0 else np.array([1.0, 0.0, 0.0])
        self._tick = 0

    def _drift_step(self, dt_s: float) -> None:
        decay = math.exp(-dt_s / self.params.noise_tau_s)
        spread = self.sigma * math.sqrt(max(0.0, 1.0 - decay * decay))
        noise = self.rng.normal(0.0, 1.0, 3)   # drawn every tick, even at sigma 0
        self.drift = self.drift * decay + spread * noise

    def step(self, pos: Vec3, waypoint: Vec3, felt_force: Vec3, dt_s: float) -> np.ndarray:
        """One tick of motion (μm): returns the displacement to apply."""
        self._drift_step(dt_s)
        aim = waypoint.to_array() + self.drift
        if self.kind == "deviant" and self.params.excursion_um > 0:
            half = (self._tick // self.params.excursion_period) % 2
            sign = 1.0 if half == 0 else -1.0
            aim = aim + self._lateral * (sign * self.params.excursion_um)
        self._tick += 1
        delta = aim - pos.to_array()
        cap = self.params.speed_um_s * dt_s
        n = float(np.linalg.norm(delta))
        if n > cap:
            delta = delta * (cap / n)
        return delta + felt_force.to_array() * self.params.responsiveness_um_per_n

    def complete_trial(self) -> None:
        """Learner improves between trials; other kinds are unchanged."""
        if self.kind == "learner":
            self.sigma *= self.params.sigma_decay


def follow_waypoints(
    tracker: WaypointTracker,
    waypoints: np.ndarray,
    dwell: int = 1,
    dt_s: float = 0.05,
    guide=None,
    guidance=None,
) -> np.ndarray:
    """Closed-loop run over a waypoint list; returns per-tick positions.

    When a guide path and guidance config are given, the force rendered at
    each new position is felt on the next tick, as in the live loop.
    """
    from .guidance import guidance_force

    if dwell < 1:
        raise ValueError(f"dwell must be >= 1, got {dwell}")
    pos = Vec3.from_array(np.asarray(waypoints[0], dtype=float))
    felt = Vec3.zero()
    out = []
    for wp in np.asarray(waypoints, dtype=float):
        target = Vec3.from_array(wp)
        for _ in range(dwell):
            delta = tracker.step(pos, target, felt, dt_s)
            pos = Vec3.from_array(pos.to_array() + delta)
            out.append(pos.to_array())
            if guide is not None and guidance is not None:
                felt = guidance_force(pos, guide, guidance).force
    return np.asarray(out)
