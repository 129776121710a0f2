"""Automatic skill analysis: per-trial metrics and learning curves.

Metrics are pure functions of recorded data, so a batch replay of a
session log yields bit-identical numbers to the live run.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .bus import SessionLog
from .geometry import Vec3, as_points_array
from .lfd import GuidePath


class Setting(str, Enum):
    """Feedback condition for one trial."""

    NF = "NF"          # no feedback
    TF = "TF"          # tactile feedback only
    HG = "HG"          # haptic guidance only
    TF_HG = "TF_HG"    # tactile feedback and haptic guidance

    @property
    def tactile_on(self) -> bool:
        return self in (Setting.TF, Setting.TF_HG)

    @property
    def guidance_on(self) -> bool:
        return self in (Setting.HG, Setting.TF_HG)


class UndefinedMetricError(ValueError):
    """Metric asked of data it is not defined for (e.g. empty trajectory)."""


@dataclass(frozen=True)
class TrialMetrics:
    trial_id: str
    setting: Setting
    time_cost_s: float
    trajectory_rmse_um: float
    insertion_errors_um: tuple[float, ...]
    reminder_count: int

    def validate(self) -> "TrialMetrics":
        if self.time_cost_s < 0:
            raise ValueError(f"time_cost_s must be >= 0, got {self.time_cost_s}")
        if self.trajectory_rmse_um < 0:
            raise ValueError(f"trajectory_rmse_um must be >= 0, got {self.trajectory_rmse_um}")
        if any(e < 0 for e in self.insertion_errors_um):
            raise ValueError(f"insertion errors must be >= 0, got {self.insertion_errors_um}")
        if self.reminder_count < 0:
            raise ValueError(f"reminder_count must be >= 0, got {self.reminder_count}")
        return self

    def to_json_obj(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "setting": self.setting.value,
            "time_cost_s": self.time_cost_s,
            "trajectory_rmse_um": self.trajectory_rmse_um,
            "insertion_errors_um": list(self.insertion_errors_um),
            "reminder_count": self.reminder_count,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrialMetrics":
        return cls(
            trial_id=obj["trial_id"],
            setting=Setting(obj["setting"]),
            time_cost_s=float(obj["time_cost_s"]),
            trajectory_rmse_um=float(obj["trajectory_rmse_um"]),
            insertion_errors_um=tuple(float(e) for e in obj["insertion_errors_um"]),
            reminder_count=int(obj["reminder_count"]),
        ).validate()


def trajectory_rmse(executed: Sequence[Vec3] | np.ndarray, guide: GuidePath) -> float:
    """Root mean square of each executed point's distance to its nearest
    guide point.

    Nearest-point correspondence: executed and guide trajectories have no
    shared time base (operators pause, re-clutch, overshoot), so pairing by
    index would punish timing, not shape.
    """
    pts = executed if isinstance(executed, np.ndarray) else as_points_array(executed)
    if len(pts) == 0:
        raise UndefinedMetricError("trajectory RMSE is undefined for an empty trajectory")
    diffs = pts[:, None, :] - guide.points[None, :, :]
    sq = np.einsum("tgk,tgk->tg", diffs, diffs)
    return float(np.sqrt(np.mean(np.min(sq, axis=1))))


def insertion_error(attempt: Vec3, target: Vec3) -> float:
    """Euclidean distance between the final tool position and the target."""
    return attempt.distance_to(target)


def count_rising_edges(flags: Iterable[bool]) -> int:
    """Rising edges with an implicit initial False."""
    count = 0
    prev = False
    for flag in flags:
        if flag and not prev:
            count += 1
        prev = bool(flag)
    return count


@dataclass(frozen=True)
class SettingSummary:
    setting: Setting
    n_trials: int
    mean_time_cost_s: float
    mean_trajectory_rmse_um: float
    mean_insertion_error_um: float
    mean_reminder_count: float

    def to_json_obj(self) -> dict:
        return {
            "setting": self.setting.value,
            "n_trials": self.n_trials,
            "mean_time_cost_s": self.mean_time_cost_s,
            "mean_trajectory_rmse_um": self.mean_trajectory_rmse_um,
            "mean_insertion_error_um": self.mean_insertion_error_um,
            "mean_reminder_count": self.mean_reminder_count,
        }


@dataclass
class LearningCurve:
    """Chronological metrics for one trainee plus a rolling-mean view."""

    trials: list[TrialMetrics] = field(default_factory=list)
    window: int = 3

    def append(self, metrics: TrialMetrics) -> None:
        self.trials.append(metrics)

    def rmse_series(self) -> list[float]:
        return [t.trajectory_rmse_um for t in self.trials]

    def rolling_mean_rmse(self) -> list[float]:
        if self.window <= 0:
            raise ValueError(f"window must be > 0, got {self.window}")
        series = self.rmse_series()
        out = []
        for i in range(len(series)):
            lo = max(0, i - self.window + 1)
            out.append(float(np.mean(series[lo:i + 1])))
        return out


def summarize(trials: Sequence[TrialMetrics]) -> dict[Setting, SettingSummary]:
    """Per-setting means over a batch of trials."""
    out: dict[Setting, SettingSummary] = {}
    for setting in Setting:
        group = [t for t in trials if t.setting == setting]
        if not group:
            continue
        errors = [e for t in group for e in t.insertion_errors_um]
        out[setting] = SettingSummary(
            setting=setting,
            n_trials=len(group),
            mean_time_cost_s=float(np.mean([t.time_cost_s for t in group])),
            mean_trajectory_rmse_um=float(np.mean([t.trajectory_rmse_um for t in group])),
            mean_insertion_error_um=float(np.mean(errors)) if errors else math.nan,
            mean_reminder_count=float(np.mean([t.reminder_count for t in group])),
        )
    return out


# ---------------------------------------------------------------------------
# Recomputing metrics from a recorded session log

TRIAL_SCHEMA = "tims/trial/1"


class LogParseError(ValueError):
    """Session log lacks the structure the metric extraction needs."""


def metrics_from_log(log: SessionLog, guide: Optional[GuidePath]) -> TrialMetrics:
    """Rebuild TrialMetrics from a recorded trial.

    Reads the trial event stream (device "trial") for identity, phase
    windows, and insertion attempts; follower positions during the trace
    phase feed the RMSE; haptic fixture_violated rising edges are the
    reminder count. Works identically on live logs and batch replays.
    """
    trial_id = None
    setting = None
    start_ms = None
    end_ms = None
    phase = None
    trace_points: list[list[float]] = []
    insertion_errors: list[float] = []
    violated_flags: list[bool] = []

    for _rx_ms, env in log.entries:
        payload = env.payload
        if env.device_id == "trial":
            event = payload.get("event")
            if event == "start":
                trial_id = payload.get("trial_id")
                setting = Setting(payload.get("setting"))
                start_ms = env.timestamp_ms
            elif event == "phase":
                phase = payload.get("phase")
            elif event == "insertion_attempt":
                attempt = payload["attempt_um"]
                target = payload["target_um"]
                insertion_errors.append(insertion_error(
                    Vec3(*attempt), Vec3(*target)))
            elif event == "end":
                end_ms = env.timestamp_ms
        elif env.device_id == "follower" and phase == "trace":
            trace_points.append(payload["position_um"])
        elif env.device_id == "haptic":
            violated_flags.append(bool(payload.get("fixture_violated", False)))

    if trial_id is None or setting is None or start_ms is None or end_ms is None:
        raise LogParseError("log does not contain a complete trial event stream")
    if guide is not None and trace_points:
        rmse = trajectory_rmse(np.array(trace_points, dtype=float), guide)
    else:
        rmse = math.nan
    return TrialMetrics(
        trial_id=trial_id,
        setting=setting,
        time_cost_s=(end_ms - start_ms) / 1000.0,
        trajectory_rmse_um=rmse,
        insertion_errors_um=tuple(insertion_errors),
        reminder_count=count_rising_edges(violated_flags),
    )


# ---------------------------------------------------------------------------
# Export

def write_metrics_csv(path, trials: Sequence[TrialMetrics]) -> None:
    """Plot-data CSV: one row per trial, insertion errors averaged."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "trial", "setting", "rmse_um", "insertion_um", "time_s", "reminders"])
        for t in trials:
            mean_err = (float(np.mean(t.insertion_errors_um))
                        if t.insertion_errors_um else math.nan)
            writer.writerow([
                t.trial_id, t.setting.value, f"{t.trajectory_rmse_um:.6f}",
                f"{mean_err:.6f}", f"{t.time_cost_s:.6f}", t.reminder_count])
