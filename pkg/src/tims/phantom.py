"""Virtual eyeball phantom: sphere surface, vessel polyline, clot targets.

Tool-tissue contact is decided by an exact signed-distance test against
the sphere (standing in for a learned contact estimator behind the same
interface), so the contact channel has no classification error. Scene
frames are pure functions of (state, input) and replay bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Vec3, as_points_array


class PhantomError(ValueError):
    pass


class DegenerateNormalError(ValueError):
    """Tool tip exactly at the sphere center: contact normal undefined."""


class NoTargetError(RuntimeError):
    """Insertion attempted with every clot already punctured."""


@dataclass
class Clot:
    position: Vec3
    radius: float = 250.0
    punctured: bool = False


@dataclass
class Phantom:
    center: Vec3 = Vec3(0.0, 0.0, 0.0)
    radius: float = 12000.0
    vessel: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    clots: list[Clot] = field(default_factory=list)
    contact_tolerance: float = 20.0     # models tool-tip thickness

    def __post_init__(self):
        self.vessel = as_points_array(self.vessel) if len(self.vessel) else np.zeros((0, 3))

    def validate(self) -> "Phantom":
        if not self.radius > 0:
            raise PhantomError(f"radius must be > 0, got {self.radius}")
        if len(self.vessel):
            dist = np.abs(
                np.linalg.norm(self.vessel - self.center.to_array(), axis=1) - self.radius)
            bad = np.nonzero(dist > self.contact_tolerance)[0]
            if len(bad):
                raise PhantomError(
                    f"vessel points off the sphere surface at indices {bad.tolist()[:20]}"
                    f" (max offset {dist.max():.3f} um, tolerance {self.contact_tolerance} um)")
        for i, c in enumerate(self.clots):
            off = abs(c.position.distance_to(self.center) - self.radius)
            if off > self.contact_tolerance:
                raise PhantomError(f"clot {i} is {off:.3f} um off the surface")
            if not c.radius > 0:
                raise PhantomError(f"clot {i} radius must be > 0")
        return self

    def surface_height(self, p: Vec3) -> float:
        """Signed height above the surface (negative inside the eyeball)."""
        return p.distance_to(self.center) - self.radius

    def to_json_obj(self) -> dict:
        return {
            "schema": "tims/phantom/1",
            "center_um": self.center.to_list(),
            "radius_um": self.radius,
            "contact_tolerance_um": self.contact_tolerance,
            "vessel": [[float(v) for v in row] for row in self.vessel],
            "clots": [
                {"position_um": c.position.to_list(), "radius_um": c.radius}
                for c in self.clots
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Phantom":
        c = obj["center_um"]
        return cls(
            center=Vec3(c[0], c[1], c[2]),
            radius=float(obj["radius_um"]),
            vessel=np.array(obj.get("vessel", []), dtype=float).reshape(-1, 3),
            clots=[
                Clot(position=Vec3(*k["position_um"]), radius=float(k["radius_um"]))
                for k in obj.get("clots", [])
            ],
            contact_tolerance=float(obj.get("contact_tolerance_um", 20.0)),
        ).validate()


def load_phantom(path) -> Phantom:
    with open(path, "r", encoding="utf-8") as fh:
        return Phantom.from_json_obj(json.load(fh))


def save_phantom(path, phantom: Phantom) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(phantom.to_json_obj(), fh, indent=2)


def default_phantom() -> Phantom:
    """24 mm eyeball with a 60-degree great-circle vessel arc and two clots.

    The arc runs through the +z pole in the x-z plane; clots sit on the
    vessel at 35% and 70% of its length.
    """
    radius = 12000.0
    angles = np.linspace(-math.pi / 6.0, math.pi / 6.0, 200)
    vessel = np.column_stack([
        radius * np.sin(angles),
        np.zeros_like(angles),
        radius * np.cos(angles),
    ])
    clots = [Clot(position=Vec3(*vessel[70])), Clot(position=Vec3(*vessel[140]))]
    return Phantom(radius=radius, vessel=vessel, clots=clots).validate()


@dataclass(frozen=True)
class ContactState:
    touching: bool
    penetration: float          # um, 0 when not inside the surface
    contact_point: Vec3

    def to_payload(self) -> dict:
        return {
            "touching": self.touching,
            "penetration_um": self.penetration,
            "contact_point_um": self.contact_point.to_list(),
        }


def contact_query(tool_tip: Vec3, phantom: Phantom) -> ContactState:
    """Exact sphere contact test: touching within contact_tolerance of the surface."""
    offset = tool_tip - phantom.center
    dist = offset.norm()
    if dist == 0.0:
        raise DegenerateNormalError("tool tip at sphere center; contact point undefined")
    touching = dist <= phantom.radius + phantom.contact_tolerance
    penetration = max(0.0, phantom.radius - dist)
    contact_point = phantom.center + offset.scaled_to(phantom.radius)
    return ContactState(touching=touching, penetration=penetration, contact_point=contact_point)


@dataclass
class InsertionResult:
    hit: int | None             # clot index on success
    miss_distance: float        # um to the targeted clot center (insertion-error numerator)
    target_index: int


def attempt_insertion(tool_tip: Vec3, phantom: Phantom) -> InsertionResult:
    """Puncture attempt against the nearest unpunctured clot.

    The distance to the targeted clot center is always reported; the clot
    is marked punctured only when the tip lands within its radius.
    """
    candidates = [(i, c) for i, c in enumerate(phantom.clots) if not c.punctured]
    if not candidates:
        raise NoTargetError("all clots already punctured")
    idx, clot = min(candidates, key=lambda ic: tool_tip.distance_to(ic[1].position))
    dist = tool_tip.distance_to(clot.position)
    if dist <= clot.radius:
        clot.punctured = True
        return InsertionResult(hit=idx, miss_distance=dist, target_index=idx)
    return InsertionResult(hit=None, miss_distance=dist, target_index=idx)


@dataclass(frozen=True)
class SceneFrame:
    tool_tip: Vec3
    contact: ContactState
    clot_states: tuple[bool, ...]
    frame_seq: int
    timestamp_ms: int

    def to_payload(self) -> dict:
        return {
            "schema": "tims/scene/1",
            "tool_tip_um": self.tool_tip.to_list(),
            "contact": self.contact.to_payload(),
            "clot_states": list(self.clot_states),
            "frame_seq": self.frame_seq,
        }


@dataclass
class SceneState:
    """Owned by the single simulation loop; frames go out as immutable snapshots."""

    phantom: Phantom
    frame_seq: int = 0
    timestamp_ms: int = 0

    def step(self, follower_position: Vec3, dt_ms: int) -> SceneFrame:
        if dt_ms <= 0:
            raise ValueError(f"dt_ms must be > 0, got {dt_ms}")
        self.frame_seq += 1
        self.timestamp_ms += dt_ms
        contact = contact_query(follower_position, self.phantom)
        return SceneFrame(
            tool_tip=follower_position,
            contact=contact,
            clot_states=tuple(c.punctured for c in self.phantom.clots),
            frame_seq=self.frame_seq,
            timestamp_ms=self.timestamp_ms,
        )


def step_scene(state: SceneState, follower_position: Vec3, dt_ms: int) -> SceneFrame:
    return state.step(follower_position, dt_ms)
