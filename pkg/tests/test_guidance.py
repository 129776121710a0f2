from __future__ import annotations

import math

import numpy as np
import pytest

from tims.geometry import Vec3
from tims.guidance import (
    ForceCommand,
    GuidanceConfig,
    GuidanceConfigError,
    ProgressMode,
    SafetyBoundary,
    combine_forces,
    fixture_force,
    guidance_force,
    nearest_point,
)
from tims.lfd import GuidePath
from tims.phantom import default_phantom


def _path(points):
    pts = np.asarray(points, dtype=float)
    return GuidePath(points=pts, ci_halfwidth=np.zeros_like(pts))


def _random_path(rng, n=200):
    return _path(np.cumsum(rng.normal(0.0, 300.0, (n, 3)), axis=0))


def _brute_nearest(p, path):
    """Plain double-loop nearest vertex, ties to the lowest index."""
    best_i, best_d2 = 0, float("inf")
    for i, q in enumerate(path.points):
        d2 = (p.x - q[0]) ** 2 + (p.y - q[1]) ** 2 + (p.z - q[2]) ** 2
        if d2 < best_d2:
            best_i, best_d2 = i, d2
    return best_i, math.sqrt(best_d2)


# ---------------------------------------------------------------------------
# nearest point

def test_nearest_point_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    path = _random_path(rng)
    lo = path.points.min(axis=0) - 500.0
    hi = path.points.max(axis=0) + 500.0
    for _ in range(1000):
        p = Vec3.from_array(rng.uniform(lo, hi))
        near = nearest_point(p, path)
        want_i, want_d = _brute_nearest(p, path)
        assert near.index == want_i
        assert abs(near.dist - want_d) <= 1e-9 * max(1.0, want_d)
        assert np.array_equal(near.point.to_array(), path.points[want_i])


def test_nearest_point_tie_breaks_to_lowest_index():
    path = _path([[-100, 0, 0], [100, 0, 0], [-100, 0, 0]])
    near = nearest_point(Vec3(0, 50, 0), path)
    assert near.index == 0


def test_nearest_point_monotone_ignores_earlier_indices():
    path = _path([[0, 0, 0], [1000, 0, 0], [2000, 0, 0], [3000, 0, 0]])
    p = Vec3(10, 0, 0)
    assert nearest_point(p, path, cursor=0, mode=ProgressMode.MONOTONE).index == 0
    near = nearest_point(p, path, cursor=2, mode=ProgressMode.MONOTONE)
    assert near.index == 2
    assert near.dist == pytest.approx(1990.0)


def test_nearest_point_monotone_cursor_range_checked():
    path = _path([[0, 0, 0], [1000, 0, 0]])
    with pytest.raises(GuidanceConfigError):
        nearest_point(Vec3(0, 0, 0), path, cursor=2, mode=ProgressMode.MONOTONE)
    with pytest.raises(GuidanceConfigError):
        nearest_point(Vec3(0, 0, 0), path, cursor=-1, mode=ProgressMode.MONOTONE)


def test_nearest_point_full_scan_ignores_cursor():
    path = _path([[0, 0, 0], [1000, 0, 0], [2000, 0, 0]])
    near = nearest_point(Vec3(10, 0, 0), path, cursor=2, mode=ProgressMode.FULL_SCAN)
    assert near.index == 0


# ---------------------------------------------------------------------------
# guidance force

def test_dead_zone_boundary_is_inclusive():
    path = _path([[0, 0, 0]])
    cfg = GuidanceConfig()
    on_axis = Vec3(0, 0, 1)
    assert guidance_force(on_axis * 199.0, path, cfg).force.norm() == 0.0
    assert guidance_force(on_axis * 200.0, path, cfg).force.norm() == 0.0
    assert guidance_force(on_axis * 200.0001, path, cfg).force.norm() > 0.0


def test_force_antiparallel_to_deviation():
    rng = np.random.default_rng(7)
    path = _random_path(rng, n=60)
    cfg = GuidanceConfig()
    checked = 0
    while checked < 200:
        p = Vec3.from_array(rng.uniform(-5000, 5000, 3))
        cmd = guidance_force(p, path, cfg)
        if cmd.deviation <= cfg.deviation_threshold:
            continue
        d = Vec3.from_array(path.points[cmd.nearest_index])
        dev = (p - d).scaled_to(1.0)
        f = cmd.force.scaled_to(1.0)
        assert abs(dev.dot(f) + 1.0) <= 1e-9
        checked += 1


def test_literal_sign_convention_flips_direction():
    path = _path([[0, 0, 0]])
    p = Vec3(1000, 0, 0)
    restoring = guidance_force(p, path, GuidanceConfig()).force
    literal = guidance_force(
        p, path, GuidanceConfig(sign_convention="literal")).force
    assert restoring.x < 0 < literal.x
    assert (restoring + literal).norm() <= 1e-12


def test_force_magnitude_formula():
    path = _path([[0, 0, 0]])
    cfg = GuidanceConfig()
    rng = np.random.default_rng(3)
    for _ in range(300):
        dist = float(rng.uniform(0.0, 12000.0))
        cmd = guidance_force(Vec3(dist, 0, 0), path, cfg)
        if dist <= cfg.deviation_threshold:
            want = 0.0
        else:
            want = min(cfg.force_gain * dist, cfg.max_force)
        assert cmd.force.norm() == pytest.approx(want, abs=1e-12)
        assert cmd.deviation == pytest.approx(dist)


def test_force_clamp_is_continuous_across_cap():
    path = _path([[0, 0, 0]])
    cfg = GuidanceConfig()
    cap_dist = cfg.max_force / cfg.force_gain
    devs = np.linspace(cap_dist - 50.0, cap_dist + 50.0, 100)
    mags = [guidance_force(Vec3(float(d), 0, 0), path, cfg).force.norm()
            for d in devs]
    for a, b, da, db in zip(mags, mags[1:], devs, devs[1:]):
        assert b >= a - 1e-12                       # non-decreasing through the cap
        assert abs(b - a) <= cfg.force_gain * (db - da) + 1e-12
    assert mags[-1] == pytest.approx(cfg.max_force)


def test_guidance_config_validation():
    with pytest.raises(GuidanceConfigError):
        GuidanceConfig(deviation_threshold=-1.0).validate()
    with pytest.raises(GuidanceConfigError):
        GuidanceConfig(force_gain=0.0).validate()
    with pytest.raises(GuidanceConfigError):
        GuidanceConfig(max_force=0.0).validate()
    with pytest.raises(GuidanceConfigError):
        GuidanceConfig(sign_convention="attracting").validate()


def test_force_command_payload_shape():
    cmd = ForceCommand(force=Vec3(0.1, 0, -0.2), nearest_index=5, deviation=321.0)
    payload = cmd.to_payload(fixture_violated=True)
    assert payload["schema"] == "tims/haptic/1"
    assert payload["force_n"] == [0.1, 0.0, -0.2]
    assert payload["nearest_index"] == 5
    assert payload["deviation_um"] == 321.0
    assert payload["fixture_violated"] is True


# ---------------------------------------------------------------------------
# safety boundary fixture

def test_fixture_silent_inside_limit(phantom):
    boundary = SafetyBoundary(surface=phantom)
    surface = phantom.radius
    for depth in (0.0, 50.0, 150.0):
        tip = Vec3(0, 0, surface - depth)           # penetration == depth
        force, violated = fixture_force(tip, boundary)
        assert force.norm() == 0.0
        assert violated is False


def test_fixture_pushes_outward_beyond_limit(phantom):
    boundary = SafetyBoundary(surface=phantom)
    depth = 250.0
    tip = Vec3(0, 0, phantom.radius - depth)
    force, violated = fixture_force(tip, boundary)
    assert violated is True
    excess = depth - boundary.penetration_limit
    assert force.norm() == pytest.approx(boundary.fixture_gain * excess)
    outward = (tip - phantom.center).scaled_to(1.0)
    assert force.scaled_to(1.0).dot(outward) == pytest.approx(1.0)


def test_fixture_magnitude_grows_linearly(phantom):
    boundary = SafetyBoundary(surface=phantom)
    mags = []
    for depth in (200.0, 300.0, 400.0):
        tip = Vec3(phantom.radius - depth, 0, 0)
        force, _ = fixture_force(tip, boundary)
        mags.append(force.norm())
    assert mags[1] - mags[0] == pytest.approx(mags[2] - mags[1])


def test_boundary_validation(phantom):
    with pytest.raises(GuidanceConfigError):
        SafetyBoundary(surface=phantom, penetration_limit=0.0).validate()
    with pytest.raises(GuidanceConfigError):
        SafetyBoundary(surface=phantom, fixture_gain=0.0).validate()


# ---------------------------------------------------------------------------
# force combination

def test_combine_forces_sums_below_cap():
    total = combine_forces(Vec3(0.5, 0, 0), Vec3(0, 0.5, 0), max_force=3.0)
    assert total.to_list() == [0.5, 0.5, 0.0]


def test_combine_forces_clamps_total_not_components():
    total = combine_forces(Vec3(2.5, 0, 0), Vec3(2.5, 0, 0), max_force=3.0)
    assert total.norm() == pytest.approx(3.0)
    assert total.x == pytest.approx(3.0)
    diagonal = combine_forces(Vec3(2.5, 0, 0), Vec3(0, 2.5, 0), max_force=3.0)
    assert diagonal.norm() == pytest.approx(3.0)
    assert diagonal.x == pytest.approx(diagonal.y)
