"""Trial orchestration: one scripted operator, one phantom, one guide path.

A trial has two phases. The trace phase follows the guide path end to end;
the insertion phase stages above each clot, descends, and attempts a
puncture. Feedback settings gate the outputs, never the bookkeeping:

- guidance/fixture forces are rendered to the operator only in HG and
  TF_HG, but the boundary-violation flag is computed and logged in every
  setting (it is the reminder counter);
- the tactile display inflates only in TF and TF_HG.

Everything runs on a simulated clock with one seeded generator, so a rerun
with the same config is bit-identical, including the session log.
"""

from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytics
from .analytics import Setting, TrialMetrics
from .bus import Broker, Envelope, SessionLog
from .clocks import SimClock
from .geometry import Vec3
from .guidance import (
    ForceCommand,
    GuidanceConfig,
    ProgressMode,
    SafetyBoundary,
    combine_forces,
    fixture_force,
    guidance_force,
)
from .lfd import Demonstration, DemonstrationSet, GuidePath, fit, preprocess
from .operators import OperatorParams, ScriptedOperator, expert_demonstrations
from .phantom import Phantom, SceneState, attempt_insertion, default_phantom
from .tactile import TactileFrame, update_tactile
from .teleop import FollowerMachine, FollowerState, LeaderSample, MappingConfig
from .lfd import GprHyperparams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRIAL_SCHEMA = analytics.TRIAL_SCHEMA
LAYOUT_SCHEMA = "tims/layout/1"


def layout_payload(phantom: Phantom, guide: GuidePath, deadzone_um: float) -> dict:
    """Static geometry renderers need, published once per trial.

    The broker's latest-value seeding hands this to observers that attach
    mid-trial, so a console never has to reconstruct geometry client-side.
    """
    return {
        "schema": LAYOUT_SCHEMA,
        "phantom": {
            "center_um": phantom.center.to_list(),
            "radius_um": float(phantom.radius),
            "vessel_um": phantom.vessel.tolist(),
            "clots": [{"position_um": c.position.to_list(), "radius_um": float(c.radius)}
                      for c in phantom.clots],
        },
        "guide": {
            "points_um": guide.points.tolist(),
            "ci_halfwidth_um": guide.ci_halfwidth.tolist(),
        },
        "deadzone_um": float(deadzone_um),
    }


@dataclass(frozen=True)
class SessionConfig:
    setting: Setting = Setting.NF
    seed: int = 0
    trial_id: str = ""
    dt_ms: int = 50
    standoff_um: float = 200.0
    resample_count: int = 200
    expert_seed: int = 7
    skill_scale: float = 1.0
    max_ticks: int = 60000
    realtime: bool = False
    operator: OperatorParams = field(default_factory=OperatorParams)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    mapping: MappingConfig = field(default_factory=MappingConfig)

    def resolved_trial_id(self) -> str:
        return self.trial_id or f"trial-{self.setting.value}-s{self.seed}"

    @classmethod
    def from_dict(cls, obj: dict) -> "SessionConfig":
        obj = dict(obj)
        op = OperatorParams(**obj.pop("operator", {}))
        guidance_obj = dict(obj.pop("guidance", {}))
        if "progress_mode" in guidance_obj:
            guidance_obj["progress_mode"] = ProgressMode(guidance_obj["progress_mode"])
        gd = GuidanceConfig(**guidance_obj).validate()
        mapping_obj = dict(obj.pop("mapping", {}))
        for key in ("workspace_min", "workspace_max"):
            if key in mapping_obj:
                mapping_obj[key] = Vec3(*mapping_obj[key])
        mp = MappingConfig(**mapping_obj).validate()
        if "setting" in obj:
            obj["setting"] = Setting(obj["setting"])
        return cls(operator=op, guidance=gd, mapping=mp, **obj)

    @classmethod
    def from_toml(cls, path) -> "SessionConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


@dataclass
class TrialResult:
    metrics: TrialMetrics
    guide: GuidePath
    log: Optional[SessionLog] = None


def build_guide(
    phantom: Phantom,
    standoff_um: float = 200.0,
    resample_count: int = 200,
    expert_seed: int = 7,
    hyperparams: Optional[GprHyperparams] = None,
) -> GuidePath:
    """Expert demonstrations -> preprocessing -> GPR fit -> guide path."""
    raws = expert_demonstrations(phantom, standoff_um=standoff_um, seed=expert_seed)
    demos = [preprocess(raw, resample_count, f"expert-{i}") for i, raw in enumerate(raws)]
    _model, guide = fit(DemonstrationSet(demos, resample_count=resample_count),
                        hyperparams=hyperparams)
    return guide


class _TrialStopped(Exception):
    """Internal unwind when a stop is requested or budgets run out."""


class _Feed:
    """Per-device sequence numbers for one trial's publishes."""

    def __init__(self, broker: Optional[Broker], clock: SimClock):
        self.broker = broker
        self.clock = clock
        self._seq: dict[str, int] = {}

    @property
    def active(self) -> bool:
        return self.broker is not None

    def pub(self, device: str, payload: dict) -> None:
        if self.broker is None:
            return
        seq = self._seq.get(device, 0) + 1
        self._seq[device] = seq
        self.broker.publish(Envelope(
            device_id=device, seq=seq, timestamp_ms=self.clock.now_ms(), payload=payload))


def _path_point(guide: GuidePath, x: float) -> np.ndarray:
    pts = guide.points
    if x <= 0:
        return pts[0]
    if x >= len(pts) - 1:
        return pts[-1]
    i = int(x)
    f = x - i
    return pts[i] * (1.0 - f) + pts[i + 1] * f


class _TrialLoop:
    """Mutable state for one running trial; drives all components per tick."""

    def __init__(
        self,
        cfg: SessionConfig,
        guide: GuidePath,
        phantom: Phantom,
        broker: Optional[Broker],
        stop_flag: Optional[threading.Event],
    ):
        self.cfg = cfg
        self.guide = guide
        self.phantom = phantom
        self.stop_flag = stop_flag
        self.setting = cfg.setting
        self.dt_ms = cfg.dt_ms
        self.dt_s = cfg.dt_ms / 1000.0

        self.clock = SimClock()
        if broker is not None:
            broker.clock = self.clock
        self.feed = _Feed(broker, self.clock)
        self.rng = np.random.default_rng(cfg.seed)
        self.op = ScriptedOperator(cfg.operator.scaled(cfg.skill_scale), phantom, self.rng)

        start = Vec3.from_array(guide.points[0])
        self.machine = FollowerMachine(
            cfg.mapping, FollowerState(position=start, engaged=True))
        self.scene = SceneState(phantom)
        self.boundary = SafetyBoundary(phantom).validate()
        self.wtd = TactileFrame.idle()
        self.gcfg_trace = replace(self.cfg.guidance, progress_mode=ProgressMode.MONOTONE)
        self.gcfg_scan = replace(self.cfg.guidance, progress_mode=ProgressMode.FULL_SCAN)

        self.leader_mm = Vec3.zero()
        self.leader_seq = -1
        self.pedal = True
        self.pedal_published: Optional[bool] = None

        # previous-tick feedback (one-tick human reaction latency)
        self.felt_prev = Vec3.zero()
        self.wtd_level_prev = 0.0
        self.pen_prev = 0.0

        self.cursor = 0.0
        self.tick_count = 0
        self.trace_points: list[Vec3] = []
        self.violated_flags: list[bool] = []
        self.insertion_errors: list[float] = []
        self.in_trace_phase = False

    # -- low-level single tick ------------------------------------------------

    def _reaction_delta(self, pos: Vec3, allow_retreat: bool) -> np.ndarray:
        """Feedback-driven part of the operator's motion for this tick.

        Compliance with felt force is always on; the startle retreat from
        unexpected contact is off during deliberate-contact maneuvers
        (descents, palpation, withdrawal).
        """
        p = self.op.params
        delta = self.felt_prev.to_array() * (p.compliance_um_per_ns * self.dt_s)
        if allow_retreat and self.setting.tactile_on and self.wtd_level_prev > p.touch_level:
            retreat = min(p.retreat_v_um_s * self.dt_s, self.pen_prev + 40.0)
            delta = delta + self.op.outward_unit(pos).to_array() * retreat
        return delta

    def tick(
        self,
        desired_delta: np.ndarray,
        gcfg: GuidanceConfig,
        cursor: int,
        stylus: bool = False,
        allow_retreat: bool = True,
    ) -> ForceCommand:
        """Advance the world one step under the operator's desired motion."""
        if self.stop_flag is not None and self.stop_flag.is_set():
            raise _TrialStopped
        self.tick_count += 1
        if self.tick_count > self.cfg.max_ticks:
            raise _TrialStopped
        self.clock.advance(self.dt_ms)
        if self.cfg.realtime:
            time.sleep(self.dt_s)

        pos_before = self.machine.state.position
        desired_delta = desired_delta + self._reaction_delta(pos_before, allow_retreat)

        # route through the leader arm: mm deltas scaled back down
        alpha_gain = self.cfg.mapping.alpha * 1000.0
        if self.pedal:
            self.leader_mm = self.leader_mm + Vec3.from_array(desired_delta / alpha_gain)
        else:
            # clutch open: operator recenters the leader, follower frozen
            self.leader_mm = self.leader_mm * 0.8
        self.leader_seq += 1
        sample = LeaderSample(
            position=self.leader_mm, stylus_pressed=stylus, pedal_engaged=self.pedal,
            timestamp_ms=self.clock.now_ms(), seq=self.leader_seq)
        self.machine.feed(sample)
        pos = self.machine.state.position

        frame = self.scene.step(pos, self.dt_ms)
        touching = frame.contact.touching
        self.wtd = update_tactile(
            self.wtd, self.setting.tactile_on and touching, self.dt_ms)

        fix_force, violated = fixture_force(pos, self.boundary)
        fc = guidance_force(pos, self.guide, gcfg, cursor=cursor)
        if self.setting.guidance_on:
            rendered = combine_forces(fc.force, fix_force, gcfg.max_force)
        else:
            rendered = Vec3.zero()

        # operator learns from what they can feel
        if self.setting.guidance_on:
            self.op.recalibrate_force(rendered, self.dt_s)
        if self.setting.tactile_on and self.wtd.actuators[0] > self.op.params.touch_level:
            self.op.recalibrate_touch(pos, self.dt_s)

        if self.feed.active:
            self.feed.pub("leader", sample.to_payload())
            self.feed.pub("follower", self.machine.state.to_payload())
            self.feed.pub("scene", frame.to_payload())
            self.feed.pub("haptic", ForceCommand(
                force=rendered, nearest_index=fc.nearest_index,
                deviation=fc.deviation).to_payload(fixture_violated=violated))
            self.feed.pub("wtd", self.wtd.to_payload())
            if self.pedal_published != self.pedal:
                self.feed.pub("pedal", {"schema": "tims/pedal/1", "engaged": self.pedal})
                self.pedal_published = self.pedal

        self.violated_flags.append(violated)
        if self.in_trace_phase:
            self.trace_points.append(pos)

        self.felt_prev = rendered
        self.wtd_level_prev = self.wtd.actuators[0]
        self.pen_prev = frame.contact.penetration
        return fc

    # -- phases ---------------------------------------------------------------

    def run_trace(self) -> None:
        self.feed.pub("trial", {"schema": TRIAL_SCHEMA, "event": "phase", "phase": "trace"})
        self.in_trace_phase = True
        n = len(self.guide.points)
        p = self.op.params
        while self.cursor < n - 1:
            pos = self.machine.state.position
            self.op.bias_step(pos, self.dt_s)
            jit = self.op.jitter()
            target = _path_point(self.guide, self.cursor)
            perceived = Vec3.from_array(target + self.op.bias + jit)
            delta = self.op.track_velocity(pos, perceived, self.dt_s)
            fc = self.tick(delta, self.gcfg_trace, cursor=int(self.cursor))
            self.cursor += p.pace_idx_s * self.dt_s * self.op.pace_factor(fc.deviation)
        self.in_trace_phase = False

    def _stagnated(self, history: list[Vec3], span: int = 6, tol_um: float = 15.0) -> bool:
        """Operator gives up pushing when the tool stops making net progress
        (force equilibrium against the guidance). Net drift over the window,
        not per-tick motion: jitter wiggles must not mask the stall."""
        if len(history) < span + 1:
            return False
        return history[-(span + 1)].distance_to(history[-1]) < tol_um

    def _approach(self, hover: np.ndarray, max_ticks: int = 600) -> None:
        p = self.op.params
        history = [self.machine.state.position]
        for _ in range(max_ticks):
            pos = self.machine.state.position
            self.op.bias_step(pos, self.dt_s)
            jit = self.op.jitter()
            err = self.op.bias + jit
            if self.setting.guidance_on:
                # staging happens inside the guidance tube: aim error shrinks
                err = err * p.tube_residual
            perceived = Vec3.from_array(hover + err)
            delta = self.op.track_velocity(pos, perceived, self.dt_s)
            self.tick(delta, self.gcfg_scan, cursor=0)
            history.append(self.machine.state.position)
            if history[-1].distance_to(perceived) < 60.0 or self._stagnated(history):
                return

    def _palpate(self, clot_pos: np.ndarray, u_out: np.ndarray, max_ticks: int = 24) -> None:
        """Tactile-confirmed contact lets the operator feel the clot bump
        and trim part of the remaining lateral error in place."""
        p = self.op.params
        pos = self.machine.state.position.to_array()
        offset = pos - clot_pos
        depth = np.dot(offset, u_out)
        lateral = offset - u_out * depth
        residual = p.palpation_residual
        if self.setting.guidance_on:
            # the felt bump is judged against the tube axis, so the two
            # cues compound instead of merely agreeing
            residual *= p.tube_residual
        refined = Vec3.from_array(
            clot_pos + u_out * depth + lateral * residual)
        history = [self.machine.state.position]
        for _ in range(max_ticks):
            cur = self.machine.state.position
            self.op.bias_step(cur, self.dt_s)
            self.op.jitter()
            delta = self.op.track_velocity(cur, refined, self.dt_s)
            self.tick(delta, self.gcfg_scan, cursor=0, allow_retreat=False)
            history.append(self.machine.state.position)
            if history[-1].distance_to(refined) < 15.0 or self._stagnated(history, span=4):
                return

    def _descend_and_attempt(self, target_index: int) -> None:
        p = self.op.params
        clot = self.phantom.clots[target_index]
        clot_pos = clot.position.to_array()
        center = self.phantom.center.to_array()
        u_out = clot_pos - center
        u_out = u_out / np.linalg.norm(u_out)

        # blind depth plan: inward bias reads as "surface is deeper"
        inward_now = float(np.dot(self.op.bias, -u_out))
        misjudge = max(0.0, inward_now) + self.op.depth_misjudge()
        aim_err = self.op.aim_noise()
        h = self.cfg.standoff_um
        reached_plan = False
        touched = False
        history = [self.machine.state.position]
        for _ in range(500):
            pos = self.machine.state.position
            self.op.bias_step(pos, self.dt_s)
            jit = self.op.jitter()
            if self.setting.tactile_on and self.wtd_level_prev > p.touch_level:
                touched = True  # contact felt: depth found
                break
            h -= p.descend_v_um_s * self.dt_s
            if h <= -misjudge:
                h = -misjudge
                reached_plan = True
            lateral = self.op.bias + aim_err + jit
            if self.setting.guidance_on:
                # parked in the force-free tube, alignment is judged along
                # one axis instead of three: most of the aim error goes away
                lateral = lateral * p.tube_residual
            lateral = lateral - u_out * np.dot(lateral, u_out)
            aim = Vec3.from_array(clot_pos + u_out * h + lateral)
            delta = self.op.track_velocity(pos, aim, self.dt_s)
            self.tick(delta, self.gcfg_scan, cursor=0, allow_retreat=False)
            history.append(self.machine.state.position)
            if reached_plan and (history[-1].distance_to(aim) < 40.0
                                 or self._stagnated(history)):
                break

        if touched:
            self._palpate(clot_pos, u_out)

        # settle, then trigger the insertion with the stylus button
        for _ in range(p.settle_ticks):
            self.op.bias_step(self.machine.state.position, self.dt_s)
            self.op.jitter()
            self.tick(np.zeros(3), self.gcfg_scan, cursor=0, allow_retreat=False)
        self.op.bias_step(self.machine.state.position, self.dt_s)
        self.op.jitter()
        self.tick(np.zeros(3), self.gcfg_scan, cursor=0, stylus=True, allow_retreat=False)
        self.machine.consume_insertion_latch()

        attempt = self.machine.state.position
        result = attempt_insertion(attempt, self.phantom)
        target = Vec3.from_array(clot_pos)
        error = analytics.insertion_error(attempt, target)
        self.insertion_errors.append(error)
        self.feed.pub("trial", {
            "schema": TRIAL_SCHEMA,
            "event": "insertion_attempt",
            "attempt_um": attempt.to_list(),
            "target_um": target.to_list(),
            "target_index": target_index,
            "hit": result.hit == target_index,
        })

        # withdraw to a safe height
        for _ in range(60):
            pos = self.machine.state.position
            self.op.bias_step(pos, self.dt_s)
            self.op.jitter()
            out_delta = u_out * (p.v_max_um_s * self.dt_s)
            self.tick(out_delta, self.gcfg_scan, cursor=0, allow_retreat=False)
            height = float(np.dot(self.machine.state.position.to_array() - center, u_out))
            if height >= self.phantom.radius + 1.5 * self.cfg.standoff_um:
                break

    def _clutch_pause(self, ticks: int = 10) -> None:
        self.pedal = False
        for _ in range(ticks):
            self.op.bias_step(self.machine.state.position, self.dt_s)
            self.op.jitter()
            self.tick(np.zeros(3), self.gcfg_scan, cursor=0, allow_retreat=False)
        self.pedal = True

    def run_insertions(self) -> None:
        self.feed.pub("trial", {
            "schema": TRIAL_SCHEMA, "event": "phase", "phase": "insertion"})
        center = self.phantom.center.to_array()
        for k in range(len(self.phantom.clots)):
            clot_pos = self.phantom.clots[k].position.to_array()
            u_out = clot_pos - center
            u_out = u_out / np.linalg.norm(u_out)
            hover = clot_pos + u_out * self.cfg.standoff_um
            self._approach(hover)
            self._descend_and_attempt(k)
            if k + 1 < len(self.phantom.clots):
                self._clutch_pause()


def run_trial(
    cfg: SessionConfig,
    broker: Optional[Broker] = None,
    guide: Optional[GuidePath] = None,
    phantom: Optional[Phantom] = None,
    record: bool = False,
    stop_flag: Optional[threading.Event] = None,
) -> TrialResult:
    """Run one complete scripted trial; returns metrics (and the log when
    recording).

    The phantom is created fresh unless supplied (puncture state is per
    trial). The guide path is fit from the expert demonstrations unless
    supplied; benchmark runs share one fit across trials.
    """
    trial_id = cfg.resolved_trial_id()
    if phantom is None:
        phantom = default_phantom()
    if guide is None:
        guide = build_guide(
            phantom, standoff_um=cfg.standoff_um,
            resample_count=cfg.resample_count, expert_seed=cfg.expert_seed)

    log: Optional[SessionLog] = None
    attached = False
    external = broker is not None
    prev_clock = broker.clock if external else None
    if record:
        log = SessionLog(session_id=trial_id, meta={
            "setting": cfg.setting.value, "seed": cfg.seed, "dt_ms": cfg.dt_ms})
        if broker is None:
            broker = Broker(log=log, validate=True)
        else:
            broker.log = log
            attached = True

    loop = _TrialLoop(cfg, guide, phantom, broker, stop_flag)
    start_ms = loop.clock.now_ms()
    loop.feed.pub("trial", {
        "schema": TRIAL_SCHEMA, "event": "start", "trial_id": trial_id,
        "setting": cfg.setting.value, "seed": cfg.seed})
    loop.feed.pub("layout", layout_payload(
        phantom, guide, cfg.guidance.deviation_threshold))
    try:
        loop.run_trace()
        loop.run_insertions()
    except _TrialStopped:
        pass
    finally:
        end_ms = loop.clock.now_ms()
        loop.feed.pub("trial", {"schema": TRIAL_SCHEMA, "event": "end"})
        if attached:
            broker.log = None
        if external:
            broker.clock = prev_clock

    if loop.trace_points:
        rmse = analytics.trajectory_rmse(loop.trace_points, guide)
    else:
        rmse = float("nan")
    metrics = TrialMetrics(
        trial_id=trial_id,
        setting=cfg.setting,
        time_cost_s=(end_ms - start_ms) / 1000.0,
        trajectory_rmse_um=rmse,
        insertion_errors_um=tuple(loop.insertion_errors),
        reminder_count=analytics.count_rising_edges(loop.violated_flags),
    )
    return TrialResult(metrics=metrics, guide=guide, log=log)


def run_benchmark(
    seeds: list[int],
    settings: Optional[list[Setting]] = None,
    base: Optional[SessionConfig] = None,
) -> list[TrialMetrics]:
    """Matched-seed sweep: every setting sees the same seed list.

    The guide path is fit once and shared, as in a real training session
    where all conditions use the same recorded expertise.
    """
    if settings is None:
        settings = list(Setting)
    base = base if base is not None else SessionConfig()
    phantom = default_phantom()
    guide = build_guide(
        phantom, standoff_um=base.standoff_um,
        resample_count=base.resample_count, expert_seed=base.expert_seed)
    out = []
    for setting in settings:
        for seed in seeds:
            cfg = replace(base, setting=setting, seed=seed, trial_id="")
            result = run_trial(cfg, guide=guide)
            out.append(result.metrics)
    return out


def run_learning_curve(
    n_trials: int = 10,
    gamma: float = 0.85,
    setting: Setting = Setting.HG,
    seed: int = 0,
    base: Optional[SessionConfig] = None,
    window: int = 3,
) -> analytics.LearningCurve:
    """Guided curriculum: perception error shrinks by gamma each round."""
    base = base if base is not None else SessionConfig()
    phantom = default_phantom()
    guide = build_guide(
        phantom, standoff_um=base.standoff_um,
        resample_count=base.resample_count, expert_seed=base.expert_seed)
    curve = analytics.LearningCurve(window=window)
    for i in range(n_trials):
        cfg = replace(
            base, setting=setting, seed=seed + i,
            trial_id=f"curriculum-{i}", skill_scale=gamma ** i)
        result = run_trial(cfg, guide=guide)
        curve.append(result.metrics)
    return curve


class SessionController:
    """Engine-side backend for the /session HTTP endpoints."""

    def __init__(self, broker: Broker, log_dir: Optional[Path] = None):
        self.broker = broker
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()
        self._state = "idle"
        self._trial_id: Optional[str] = None
        self._metrics: Optional[TrialMetrics] = None
        self._error: Optional[str] = None

    def state(self) -> dict:
        with self._lock:
            out = {"state": self._state}
            if self._trial_id is not None:
                out["trial_id"] = self._trial_id
            if self._error is not None:
                out["error"] = self._error
            return out

    def start(self, config: dict) -> dict:
        with self._lock:
            if self._state == "running":
                raise RuntimeError("a session is already running")
            cfg = SessionConfig.from_dict(config)
            self._stop = threading.Event()
            self._state = "running"
            self._trial_id = cfg.resolved_trial_id()
            self._metrics = None
            self._error = None
            self._thread = threading.Thread(
                target=self._run, args=(cfg,), daemon=True, name="session-trial")
            self._thread.start()
            return {"state": "running", "trial_id": self._trial_id}

    def _run(self, cfg: SessionConfig) -> None:
        try:
            result = run_trial(
                cfg, broker=self.broker, record=True, stop_flag=self._stop)
            if self.log_dir is not None and result.log is not None:
                self.log_dir.mkdir(parents=True, exist_ok=True)
                result.log.write(self.log_dir / f"{result.metrics.trial_id}.jsonl")
            with self._lock:
                self._metrics = result.metrics
                self._state = "done"
        except Exception as e:  # surfaced through /session/state
            with self._lock:
                self._error = str(e)
                self._state = "failed"

    def stop(self) -> dict:
        with self._lock:
            if self._state != "running":
                raise RuntimeError("no session running")
            thread = self._thread
        self._stop.set()
        if thread is not None:
            thread.join(timeout=30.0)
        return self.state()

    def metrics(self) -> dict:
        with self._lock:
            if self._metrics is None:
                raise RuntimeError("no completed session")
            return self._metrics.to_json_obj()
