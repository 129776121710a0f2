"""Real-time haptic guidance against a guide path.

A dead zone of radius deviation_threshold surrounds the path: inside it
the commanded force is exactly zero. Beyond it a linear restoring force
pulls the tool toward the nearest path point, saturating at max_force.
The safety boundary wraps the phantom surface and pushes outward once
penetration exceeds its limit, flagging a violation episode.

The restoring direction (d - p) follows the training intent; the device
convention (p - d) is available behind sign_convention="literal".
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Vec3
from .lfd import GuidePath
from .phantom import Phantom, contact_query


class GuidanceConfigError(ValueError):
    pass


class ProgressMode(str, Enum):
    FULL_SCAN = "full_scan"
    MONOTONE = "monotone"


@dataclass(frozen=True)
class GuidanceConfig:
    deviation_threshold: float = 200.0       # um
    force_gain: float = 5e-4                 # N per um of deviation
    max_force: float = 3.0                   # N
    progress_mode: ProgressMode = ProgressMode.FULL_SCAN
    sign_convention: str = "restoring"       # "restoring" (d - p) or "literal" (p - d)

    def validate(self) -> "GuidanceConfig":
        if self.deviation_threshold < 0:
            raise GuidanceConfigError(f"threshold must be >= 0, got {self.deviation_threshold}")
        if not self.force_gain > 0:
            raise GuidanceConfigError(f"gain must be > 0, got {self.force_gain}")
        if not self.max_force > 0:
            raise GuidanceConfigError(f"max_force must be > 0, got {self.max_force}")
        if self.sign_convention not in ("restoring", "literal"):
            raise GuidanceConfigError(f"unknown sign convention {self.sign_convention!r}")
        return self


@dataclass(frozen=True)
class ForceCommand:
    force: Vec3                 # Newtons
    nearest_index: int
    deviation: float            # um

    def to_payload(self, fixture_violated: bool = False) -> dict:
        return {
            "schema": "tims/haptic/1",
            "force_n": self.force.to_list(),
            "nearest_index": self.nearest_index,
            "deviation_um": self.deviation,
            "fixture_violated": fixture_violated,
        }


@dataclass(frozen=True)
class NearestPoint:
    point: Vec3
    index: int
    dist: float


def nearest_point(
    p: Vec3,
    path: GuidePath,
    cursor: int = 0,
    mode: ProgressMode = ProgressMode.FULL_SCAN,
) -> NearestPoint:
    """Closest guide-path point to p; ties break to the lowest index.

    full_scan searches the whole path; monotone searches indices >= cursor
    only (the caller advances its cursor to the returned index).
    """
    if len(path) == 0:
        raise GuidanceConfigError("guide path is empty")
    start = 0
    if mode == ProgressMode.MONOTONE:
        if not (0 <= cursor < len(path)):
            raise GuidanceConfigError(f"cursor {cursor} outside path of length {len(path)}")
        start = cursor
    pts = path.points[start:]
    d2 = np.sum((pts - p.to_array()) ** 2, axis=1)
    i = int(np.argmin(d2))                 # argmin picks the first (lowest) index on ties
    return NearestPoint(point=Vec3.from_array(pts[i]), index=start + i, dist=float(np.sqrt(d2[i])))


def guidance_force(
    p: Vec3,
    path: GuidePath,
    cfg: GuidanceConfig,
    cursor: int = 0,
) -> ForceCommand:
    """Threshold-gated restoring force toward the nearest guide point."""
    cfg.validate()
    near = nearest_point(p, path, cursor=cursor, mode=cfg.progress_mode)
    if near.dist <= cfg.deviation_threshold:
        return ForceCommand(force=Vec3.zero(), nearest_index=near.index, deviation=near.dist)
    direction = near.point - p
    if cfg.sign_convention == "literal":
        direction = -direction
    magnitude = min(cfg.force_gain * near.dist, cfg.max_force)
    return ForceCommand(
        force=direction.scaled_to(magnitude),
        nearest_index=near.index,
        deviation=near.dist,
    )


@dataclass
class SafetyBoundary:
    surface: Phantom
    penetration_limit: float = 150.0     # um
    fixture_gain: float = 1e-3           # N per um of excess penetration

    def validate(self) -> "SafetyBoundary":
        if not self.penetration_limit > 0:
            raise GuidanceConfigError(
                f"penetration_limit must be > 0, got {self.penetration_limit}")
        if not self.fixture_gain > 0:
            raise GuidanceConfigError(f"fixture_gain must be > 0, got {self.fixture_gain}")
        return self


def fixture_force(p: Vec3, boundary: SafetyBoundary) -> tuple[Vec3, bool]:
    """Outward-normal repulsion beyond the penetration limit (limit inclusive).

    Violation episodes are edge-counted by the caller: this reports the
    instantaneous flag only.
    """
    contact = contact_query(p, boundary.surface)
    excess = contact.penetration - boundary.penetration_limit
    if excess <= 0:
        return Vec3.zero(), False
    outward = (p - boundary.surface.center).scaled_to(1.0)
    return outward * (boundary.fixture_gain * excess), True


def combine_forces(guidance: Vec3, fixture: Vec3, max_force: float) -> Vec3:
    """Superpose guidance and fixture forces; clamp the total magnitude last."""
    total = guidance + fixture
    n = total.norm()
    if n > max_force:
        return total.scaled_to(max_force)
    return total
