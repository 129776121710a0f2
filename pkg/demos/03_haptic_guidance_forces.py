#!/usr/bin/env python3
"""Anatomy of the guidance force law.

Sweep a tool tip away from a guide path and watch the restoring force:
zero inside the 200 um dead zone, linear in deviation past it, clamped
at 3 N. Then push a tip around a curved path and check the force always
points straight back at the nearest path point.
"""

import math
from pathlib import Path

import numpy as np

from tims.geometry import Vec3
from tims.guidance import GuidanceConfig, guidance_force, nearest_point
from tims.lfd import GuidePath

OUT = Path(__file__).parent / "out"


def main():
    cfg = GuidanceConfig()
    print(f"dead zone: {cfg.deviation_threshold} um, gain: {cfg.force_gain} N/um, "
          f"cap: {cfg.max_force} N")
    cap_dist = cfg.max_force / cfg.force_gain
    print(f"the cap engages at {cap_dist:.0f} um of deviation\n")

    line = np.zeros((50, 3))
    line[:, 0] = np.arange(50) * 2000.0
    straight = GuidePath(points=line, ci_halfwidth=np.zeros_like(line))

    devs = np.linspace(0.0, 8000.0, 161)
    mags = []
    for d in devs:
        cmd = guidance_force(Vec3(20000.0, float(d), 0.0), straight, cfg)
        mags.append(cmd.force.norm())
    mags = np.array(mags)

    print("deviation (um) -> force (N)")
    for d in (0, 100, 200, 201, 500, 1000, 3000, 6000, 7000, 8000):
        cmd = guidance_force(Vec3(20000.0, float(d), 0.0), straight, cfg)
        zone = ("dead zone" if d <= cfg.deviation_threshold
                else "capped" if cfg.force_gain * d > cfg.max_force else "linear")
        print(f"  {d:6d}  ->  {cmd.force.norm():6.3f}   ({zone})")

    # direction check on a curved path: force is antiparallel to the
    # offset from the nearest path point
    s = np.linspace(0, 1, 120)
    curve = np.stack([14000 * s, 3000 * np.sin(2 * np.pi * s), 500 * s], axis=1)
    curved = GuidePath(points=curve, ci_halfwidth=np.zeros_like(curve))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(500):
        p = Vec3(float(rng.uniform(-1000, 15000)),
                 float(rng.uniform(-5000, 5000)),
                 float(rng.uniform(-2000, 2500)))
        cmd = guidance_force(p, curved, cfg)
        if cmd.force.norm() == 0.0:
            continue
        near = nearest_point(p, curved)
        away = p - near.point
        cosine = cmd.force.dot(away) / (cmd.force.norm() * away.norm())
        worst = max(worst, abs(cosine + 1.0))
    print(f"\n500 random tips around a curved path: "
          f"largest |cos(force, away) + 1| = {worst:.2e}")
    print("(exactly antiparallel, the force never pushes along the path)")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(devs, mags, lw=1.6)
    ax.axvline(cfg.deviation_threshold, ls=":", c="gray")
    ax.axvline(cap_dist, ls=":", c="gray")
    ax.annotate("dead zone", (cfg.deviation_threshold, 0.1), rotation=90)
    ax.annotate("cap", (cap_dist, 1.0), rotation=90)
    ax.set_xlabel("deviation from guide path (um)")
    ax.set_ylabel("restoring force (N)")
    ax.set_title("threshold-gated, clamped force law")
    fig.tight_layout()
    fig.savefig(OUT / "03_force_law.png", dpi=110)
    print(f"\nwrote {OUT / '03_force_law.png'}")


if __name__ == "__main__":
    main()
