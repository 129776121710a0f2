#!/usr/bin/env python3
"""Touch the phantom, feel it through the tactile display.

A tool tip descends onto the 24 mm phantom along the +z pole, dwells in
contact, retreats, and the 4x4 pocket display inflates and deflates with
its asymmetric time constants (fast in, slow out). Afterwards the tip
punctures the first clot and the scene reports the hit.
"""

from pathlib import Path

from tims.geometry import Vec3
from tims.phantom import SceneState, attempt_insertion, default_phantom
from tims.tactile import TactileFrame, update_tactile

OUT = Path(__file__).parent / "out"
DT_MS = 50


def grid(frame: TactileFrame) -> str:
    rows = []
    for r in range(4):
        cells = frame.actuators[r * 4:(r + 1) * 4]
        rows.append(" ".join(f"{c:4.2f}" for c in cells))
    return "\n".join(rows)


def main():
    phantom = default_phantom()
    print(f"phantom: radius {phantom.radius:.0f} um, "
          f"{len(phantom.clots)} clots, tolerance {phantom.contact_tolerance} um")

    scene = SceneState(phantom=phantom)
    tactile = TactileFrame.idle()
    # descend from 1500 um above the pole, 100 um per tick, dwell, retreat
    zs = ([phantom.radius + 1500 - 100 * k for k in range(20)]
          + [phantom.radius - 40] * 14
          + [phantom.radius - 40 + 150 * k for k in range(14)])

    log = []
    for z in zs:
        frame = scene.step(Vec3(0.0, 0.0, float(z)), DT_MS)
        tactile = update_tactile(tactile, frame.contact.touching, DT_MS)
        log.append((frame.timestamp_ms, z - phantom.radius,
                    frame.contact.touching, frame.contact.penetration,
                    max(tactile.actuators)))

    print("\n  t(ms)  height(um)  touch  penetr  pocket")
    for t, h, touch, pen, lvl in log[::4]:
        print(f"  {t:5d}  {h:10.0f}  {str(touch):5s}  {pen:6.1f}  {lvl:6.3f}")

    touch_t = next(t for t, h, touch, *_ in log if touch)
    release_t = next(t for t, h, touch, *_ in log if t > touch_t and not touch)
    print(f"\ncontact from t={touch_t} to t={release_t} ms")
    peak = max(lvl for *_, lvl in log)
    final = log[-1][-1]
    print(f"pockets peaked at {peak:.3f} and were still at {final:.3f} when the "
          f"run ended: deflation (tau 120 ms) lags inflation (tau 80 ms)")

    print("\npocket grid three ticks after contact:")
    t = TactileFrame.idle()
    for i in range(len(zs)):
        t = update_tactile(t, log[i][2], DT_MS)
        if log[i][0] == touch_t + 3 * DT_MS:
            print(grid(t))
            break

    # the insertion: aim at the first clot and stab
    clot = phantom.clots[0]
    result = attempt_insertion(clot.position + Vec3(60.0, -40.0, 0.0), phantom)
    print(f"\ninsertion attempt near clot 0: hit={result.hit}, "
          f"miss distance {result.miss_distance:.1f} um "
          f"(clot radius {clot.radius:.0f} um)")
    frame = scene.step(clot.position, DT_MS)
    print(f"scene now reports clot states {frame.clot_states}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    OUT.mkdir(exist_ok=True)
    ts = [l[0] for l in log]
    lvls = [l[4] for l in log]
    touching = [l[2] for l in log]
    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.plot(ts, lvls, lw=1.6)
    ax.fill_between(ts, 0, 1, where=touching, alpha=0.15, label="in contact")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("pocket level")
    ax.set_title("tactile pocket response to a touch")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "04_tactile.png", dpi=110)
    print(f"\nwrote {OUT / '04_tactile.png'}")


if __name__ == "__main__":
    main()
