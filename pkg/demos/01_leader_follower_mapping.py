#!/usr/bin/env python3
"""Leader-to-follower motion mapping walkthrough.

A scripted hand draws a circle with the pedal held, lets go of the pedal
to reposition, draws a second circle, and finally shoves the leader far
enough to hit the follower workspace wall. Along the way: motion scaling,
the clutch, the stylus latch, and clamping.
"""

import math
from pathlib import Path

import numpy as np

from tims.geometry import Vec3
from tims.teleop import FollowerMachine, LeaderSample, MappingConfig

OUT = Path(__file__).parent / "out"


def leader_script():
    """Yields (position_mm, pedal, stylus) tuples."""
    # circle one, pedal down, 5 mm radius
    for k in range(80):
        a = 2 * math.pi * k / 80
        yield Vec3(5 * math.cos(a), 5 * math.sin(a), 0.0), True, False
    # pedal up: drag the hand 40 mm to the right, follower must not move
    for k in range(20):
        yield Vec3(5 + 2.0 * k, 0.0, 0.0), False, False
    # pedal down again: circle two around the new hand position
    for k in range(80):
        a = 2 * math.pi * k / 80
        stylus = k == 40  # one stylus tap halfway through
        yield Vec3(43 + 5 * math.cos(a), 5 * math.sin(a), 0.0), True, stylus
    # lunge upward until the follower clamps
    for k in range(30):
        yield Vec3(48.0, 0.0, 4.0 * k), True, False


def main():
    cfg = MappingConfig(alpha=0.1,
                        workspace_min=Vec3(-2000, -2000, -2000),
                        workspace_max=Vec3(2000, 2000, 2000))
    print(f"alpha = {cfg.alpha}: 1 mm of hand motion -> {cfg.alpha * 1000:.0f} um of tool motion")
    print(f"workspace = +-2000 um box\n")

    machine = FollowerMachine(cfg=cfg)
    leader_xy, follower_xy, pedal_trace = [], [], []
    latch_seen_at = None
    for seq, (pos, pedal, stylus) in enumerate(leader_script()):
        machine.feed(LeaderSample(pos, stylus, pedal, timestamp_ms=seq * 8, seq=seq))
        leader_xy.append((pos.x, pos.y))
        follower_xy.append((machine.state.position.x, machine.state.position.y))
        pedal_trace.append(pedal)
        if machine.state.insertion_latched and latch_seen_at is None:
            latch_seen_at = seq

    p = machine.state.position
    print(f"fed {seq + 1} samples")
    print(f"final follower position: ({p.x:8.1f}, {p.y:8.1f}, {p.z:8.1f}) um")
    print(f"clamp events: {machine.clamp_events} (the z lunge ran into the wall)")
    print(f"stylus latch first seen at sample {latch_seen_at}")

    # the pedal-up stretch: follower frozen while the leader moved 40 mm
    frozen = follower_xy[80:100]
    assert len(set(frozen)) == 1
    print(f"samples 80..99 (pedal up): follower pinned at {frozen[0]}, "
          f"leader moved {leader_xy[99][0] - leader_xy[80][0]:.0f} mm")
    print(f"z clamped to {p.z:.0f} um even though the leader asked for "
          f"{0.1 * 1000 * 4.0 * 29:.0f} um")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    lx, ly = np.array(leader_xy).T
    fx, fy = np.array(follower_xy).T
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    ax1.plot(lx, ly, lw=1.0)
    ax1.set_title("leader path (mm)")
    ax1.set_aspect("equal")
    engaged = np.array(pedal_trace)
    ax2.plot(fx[engaged], fy[engaged], ".", ms=2, label="pedal down")
    ax2.plot(fx[~engaged], fy[~engaged], "x", ms=4, label="pedal up (frozen)")
    ax2.set_title("follower path (um)")
    ax2.set_aspect("equal")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(OUT / "01_mapping.png", dpi=110)
    print(f"\nwrote {OUT / '01_mapping.png'}")


if __name__ == "__main__":
    main()
